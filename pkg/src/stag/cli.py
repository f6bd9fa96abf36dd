"""Command-line interface: full pipeline runs, piecewise stages, and serving.

``stag run --config pipeline.toml`` executes every stage; the other
subcommands mirror individual stages over JSONL intermediates so parts of
the pipeline can be rerun or inspected on their own.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import authors as authors_mod
from . import citelink, dedup, enrich, graphstore, kbnorm, recommend
from .config import PipelineConfig
from .errors import StagError
from .ingest import load_corpus
from .pipeline import load_venue_labels, run_pipeline
from .records import (
    author_from_record,
    author_to_record,
    edge_from_record,
    edge_to_record,
    paper_from_record,
    paper_to_record,
    read_jsonl,
    write_jsonl,
)
from .service import ApiConfig, serve


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_run(args) -> int:
    config = PipelineConfig.from_file(args.config)
    graph, report = run_pipeline(config)
    _print(report.to_dict())
    return 0


def _cmd_ingest(args) -> int:
    mentions, report = load_corpus(args.input, args.source)
    if args.out:
        count = write_jsonl(
            args.out,
            (
                {
                    "mentionId": m.mention_id,
                    "source": m.source,
                    "title": m.title,
                    "externalIds": m.external_ids,
                }
                for m in mentions
            ),
        )
    _print(
        {
            "read": report.read,
            "accepted": report.accepted,
            "rejected": report.rejected,
            "warnings": report.warnings,
        }
    )
    return 0


def _cmd_dedupe(args) -> int:
    mentions, _ = load_corpus(args.input)
    model_path = Path(args.model)
    if model_path.exists():
        model = dedup.PairScoreModel.load(model_path)
    else:
        pairs, labels = dedup.make_training_pairs(mentions, seed=args.seed)
        model = dedup.fit_pair_model(pairs, labels, threshold=args.threshold)
        model.save(model_path)
    result = dedup.dedupe_corpus(mentions, model, args.threshold)
    write_jsonl(args.out, (paper_to_record(p) for p in result.papers))
    _print(
        {
            "mentions": len(mentions),
            "papers": len(result.papers),
            "violations": result.violations,
        }
    )
    return 0


def _cmd_link(args) -> int:
    papers = read_jsonl(args.papers, paper_from_record)
    mentions, _ = load_corpus(args.corpus)
    mention_map = {}
    for paper in papers:
        for mid in paper.member_mentions:
            mention_map[mid] = paper.corpus_id
    if any(p.embedding is None for p in papers):
        enrich.assign_embeddings(papers, args.dim)
    edges = citelink.build_citation_graph(
        papers, mentions, mention_map, threshold=args.threshold
    )
    write_jsonl(args.out, (edge_to_record(e) for e in edges))
    _print({"papers": len(papers), "edges": len(edges)})
    return 0


def _cmd_authors(args) -> int:
    papers = read_jsonl(args.papers, paper_from_record)
    if any(p.embedding is None for p in papers):
        enrich.assign_embeddings(papers, args.dim)
    scorer = (
        authors_mod.AuthorScorer.load(args.scorer)
        if args.scorer
        else authors_mod.default_scorer()
    )
    result = authors_mod.disambiguate_authors(papers, scorer, args.threshold)
    write_jsonl(args.out, (author_to_record(a) for a in result.authors))
    _print(
        {
            "mentions": sum(len(p.authors) for p in papers),
            "authors": len(result.authors),
        }
    )
    return 0


def _cmd_enrich(args) -> int:
    papers = read_jsonl(args.papers, paper_from_record)
    edges = read_jsonl(args.citations, edge_from_record)
    author_nodes = read_jsonl(args.authors, author_from_record)
    venue_records = kbnorm.load_venue_records(args.venue_kb)
    venue_kb = kbnorm.build_venue_kb(venue_records)
    for paper in papers:
        if paper.venue_id is None and paper.venue_raw:
            paper.venue_id = kbnorm.normalize_venue(paper.venue_raw, venue_kb)
    if any(p.embedding is None for p in papers):
        enrich.assign_embeddings(papers, args.dim)
    fos_model = enrich.train_fos(load_venue_labels(args.venue_labels), papers)
    for paper in papers:
        labels = enrich.classify_fos(paper, fos_model)
        paper.fields_of_study = sorted(labels - {enrich.NOT_APPLICABLE})
    paper_author_ids: dict[int, set[int]] = {p.corpus_id: set() for p in papers}
    for node in author_nodes:
        for corpus_id, _ in node.mention_refs:
            paper_author_ids.setdefault(corpus_id, set()).add(node.author_id)
    enrich.mark_influential_citations(edges, paper_author_ids)
    write_jsonl(args.out_papers, (paper_to_record(p) for p in papers))
    write_jsonl(args.out_citations, (edge_to_record(e) for e in edges))
    _print(
        {
            "papers": len(papers),
            "influential": sum(1 for e in edges if e.is_influential),
            "fosLabels": fos_model.labels,
        }
    )
    return 0


def _cmd_export(args) -> int:
    papers = read_jsonl(args.papers, paper_from_record)
    edges = read_jsonl(args.citations, edge_from_record)
    author_nodes = read_jsonl(args.authors, author_from_record)
    venue_records = kbnorm.load_venue_records(args.venue_kb)
    registry = kbnorm.load_institution_records(args.registry) if args.registry else []
    referenced = {i for a in author_nodes for i in a.affiliation_inst_ids}
    institutions = [r for r in registry if r.inst_id in referenced]
    dims = {len(p.embedding) for p in papers if p.embedding is not None}
    graph = graphstore.build_graph(
        papers,
        author_nodes,
        venue_records,
        edges,
        institutions=institutions,
        embedding_dim=dims.pop() if len(dims) == 1 else None,
    )
    manifest = graphstore.export_snapshot(graph, args.snapshot_dir, args.release_id)
    _print({name: info["records"] for name, info in manifest.datasets.items()})
    return 0


def _cmd_serve(args) -> int:
    keys: set[str] = set()
    if args.keys:
        keys = {
            line.strip()
            for line in Path(args.keys).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
    config = ApiConfig(
        snapshots_root=args.snapshot,
        host=args.host,
        port=args.port,
        api_keys=keys,
        unauth_rate_limit=args.rate_limit,
    )
    server = serve(config)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _parse_id_list(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip()]


def _cmd_recommend(args) -> int:
    graph = graphstore.import_snapshot(args.snapshot)
    ranked = recommend.recommend(
        _parse_id_list(args.positives),
        _parse_id_list(args.negatives) if args.negatives else [],
        graph,
        args.now,
        k=args.k,
        seed=args.seed,
    )
    _print(
        [
            {"corpusId": cid, "score": score, "title": graph.papers[cid].title}
            for cid, score in ranked
        ]
    )
    return 0


def _cmd_review(args) -> int:
    graph = graphstore.import_snapshot(args.snapshot)
    submission_authors = _parse_id_list(args.authors) if args.authors else []
    coi = recommend.coi_score(args.reviewer, submission_authors, graph)
    try:
        score = recommend.match_score(
            args.reviewer, {"title": args.title, "abstract": args.abstract}, graph
        )
    except StagError:
        score = None
    _print({"coi": coi, "matchScore": score})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("ingest", help="parse a corpus and report counts")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--source", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("dedupe", help="deduplicate a corpus into papers")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True, help="model JSON (loaded, or trained and saved)")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=dedup.DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_dedupe)

    p = sub.add_parser("link", help="link bibliographies into citation edges")
    p.add_argument("--papers", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=citelink.ACCEPT_THRESHOLD)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(fn=_cmd_link)

    p = sub.add_parser("authors", help="disambiguate author mentions")
    p.add_argument("--papers", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=authors_mod.DEFAULT_THRESHOLD)
    p.add_argument("--scorer", default=None)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(fn=_cmd_authors)

    p = sub.add_parser("enrich", help="venue ids, fields of study, influential flags")
    p.add_argument("--papers", required=True)
    p.add_argument("--citations", required=True)
    p.add_argument("--authors", required=True)
    p.add_argument("--venue-kb", required=True)
    p.add_argument("--venue-labels", required=True)
    p.add_argument("--out-papers", required=True)
    p.add_argument("--out-citations", required=True)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(fn=_cmd_enrich)

    p = sub.add_parser("export", help="build the graph and export a snapshot")
    p.add_argument("--papers", required=True)
    p.add_argument("--citations", required=True)
    p.add_argument("--authors", required=True)
    p.add_argument("--venue-kb", required=True)
    p.add_argument("--registry", default=None)
    p.add_argument("--snapshot-dir", required=True)
    p.add_argument("--release-id", required=True)
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("serve", help="serve the HTTP API over a snapshot root")
    p.add_argument("--snapshot", required=True, help="snapshots root directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--keys", default=None, help="file with one API key per line")
    p.add_argument("--rate-limit", type=int, default=100)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("recommend", help="recommend recent papers for seed ids")
    p.add_argument("--snapshot", required=True, help="one release directory")
    p.add_argument("--positives", required=True, help="comma-separated corpus ids")
    p.add_argument("--negatives", default="")
    p.add_argument("--now", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_recommend)

    p = sub.add_parser("review", help="COI and match score for one reviewer")
    p.add_argument("--snapshot", required=True, help="one release directory")
    p.add_argument("--reviewer", type=int, required=True)
    p.add_argument("--title", default="")
    p.add_argument("--abstract", default="")
    p.add_argument("--authors", default="", help="submission author ids")
    p.set_defaults(fn=_cmd_review)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
