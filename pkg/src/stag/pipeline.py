"""End-to-end pipeline orchestration: corpus in, snapshot out.

Stage order: ingest, dedup (train-or-load pair model), venue normalization,
embeddings, citation linking, author disambiguation, affiliation linking,
field-of-study + influential enrichment, graph build, snapshot export.
Everything is deterministic for a fixed config; rerunning produces a
byte-identical snapshot.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import authors as authors_mod
from . import citelink, dedup, enrich, graphstore, kbnorm
from .config import PipelineConfig
from .errors import ConfigError, StagError
from .ingest import load_corpus
from .records import (
    author_to_record,
    edge_to_record,
    paper_to_record,
    write_jsonl,
)


@dataclass
class RunReport:
    """Per-stage counters for one pipeline run."""

    stages: dict[str, dict] = field(default_factory=dict)
    snapshot_path: str = ""
    release_id: str = ""

    def record(self, stage: str, **counts) -> None:
        self.stages[stage] = counts

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "snapshotPath": self.snapshot_path,
            "releaseId": self.release_id,
        }


def load_venue_labels(path: str | Path) -> dict[str, set[str]]:
    """Read the venue-label TSV: venue_id <tab> comma-separated labels."""
    labels: dict[str, set[str]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"{path}:{line_no}: expected 'venue_id<TAB>labels'")
        labels[parts[0]] = {l.strip() for l in parts[1].split(",") if l.strip()}
    return labels


def _parallel_map(fn, items: list, workers: int) -> list:
    """Order-preserving map; thread-parallel when workers > 1."""
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_pipeline(config: PipelineConfig) -> tuple[graphstore.Graph, RunReport]:
    """Run every stage and export the snapshot; returns (graph, report)."""
    report = RunReport()

    def fail(stage: str, exc: Exception) -> StagError:
        return StagError(f"pipeline stage {stage!r} failed: {exc}")

    # Ingest.
    mentions, ingest_report = load_corpus(config.corpus)
    report.record(
        "ingest",
        read=ingest_report.read,
        accepted=ingest_report.accepted,
        rejected=ingest_report.rejected,
        warnings=ingest_report.warnings,
    )
    if not mentions:
        raise StagError("pipeline stage 'ingest' failed: no usable mentions in corpus")

    # Dedup: train or load the pairwise model, then cluster.
    try:
        if config.dedup_model_path and config.dedup_model_path.exists():
            model = dedup.PairScoreModel.load(config.dedup_model_path)
            trained = False
        else:
            pairs, labels = dedup.make_training_pairs(
                mentions, min_positives=config.dedup_min_positives, seed=config.seed
            )
            model = dedup.fit_pair_model(pairs, labels, threshold=config.dedup_threshold)
            trained = True
            if config.dedup_model_path:
                model.save(config.dedup_model_path)
        result = dedup.dedupe_corpus(mentions, model, config.dedup_threshold)
    except StagError:
        raise
    except Exception as exc:
        raise fail("dedup", exc)
    papers = result.papers
    report.record(
        "dedup",
        mentions=len(mentions),
        papers=len(papers),
        model_trained=trained,
        train_auc=model.train_auc,
        violations=len(result.violations),
    )

    # Venue normalization.
    venue_records = kbnorm.load_venue_records(config.venue_kb)
    venue_kb = kbnorm.build_venue_kb(venue_records)
    resolved_venues = 0
    for paper in papers:
        venue_id = kbnorm.normalize_venue(paper.venue_raw, venue_kb) if paper.venue_raw else None
        paper.venue_id = venue_id
        if venue_id:
            resolved_venues += 1
    report.record("venues", papers=len(papers), resolved=resolved_venues)

    # Embeddings.
    dim = enrich.assign_embeddings(papers, config.embedding_dim)
    report.record("embeddings", papers=len(papers), dim=dim)

    # Citation linking.
    index = citelink.build_paper_index(papers)
    edges = citelink.build_citation_graph(
        papers, mentions, result.mention_to_corpus_id, index, config.citelink_threshold
    )
    total_bib = sum(len(m.bibliography) for m in mentions)
    report.record("citations", bib_entries=total_bib, edges=len(edges))

    # Author disambiguation.
    try:
        if config.author_scorer_path and config.author_scorer_path.exists():
            scorer = authors_mod.AuthorScorer.load(config.author_scorer_path)
        else:
            scorer = authors_mod.default_scorer()
        disambiguation = authors_mod.disambiguate_authors(
            papers, scorer, config.author_threshold
        )
    except StagError:
        raise
    except Exception as exc:
        raise fail("authors", exc)
    author_nodes = disambiguation.authors
    mention_count = sum(len(p.authors) for p in papers)
    report.record("authors", mentions=mention_count, authors=len(author_nodes))

    # Affiliation linking.
    registry = kbnorm.load_institution_records(config.institution_registry)
    inst_index = kbnorm.build_institution_index(registry)
    link_cache: dict[str, tuple[str, float] | None] = {}

    def link_one(raw: str):
        if raw not in link_cache:
            link_cache[raw] = kbnorm.link_affiliation(
                raw, inst_index, config.affiliation_threshold
            )
        return link_cache[raw]

    distinct = sorted({a.affiliation_raw for p in papers for a in p.authors if a.affiliation_raw})
    for raw, hit in zip(distinct, _parallel_map(link_one, distinct, config.workers)):
        link_cache[raw] = hit
    inst_links: dict[tuple[int, int], str] = {}
    for paper in papers:
        for author in paper.authors:
            if author.affiliation_raw:
                hit = link_cache.get(author.affiliation_raw)
                if hit:
                    inst_links[(paper.corpus_id, author.position)] = hit[0]
    for node in author_nodes:
        node.affiliation_inst_ids = {
            inst_links[ref] for ref in node.mention_refs if ref in inst_links
        }
    report.record(
        "affiliations",
        distinct_strings=len(distinct),
        linked_mentions=len(inst_links),
    )

    # Field-of-study classification + influential citations.
    venue_labels = load_venue_labels(config.venue_labels)
    try:
        fos_model = enrich.train_fos(venue_labels, papers)
    except StagError as exc:
        raise fail("fos", exc)
    fos_assigned = 0
    fos_sets = _parallel_map(
        lambda p: enrich.classify_fos(p, fos_model), papers, config.workers
    )
    for paper, labels in zip(papers, fos_sets):
        real = sorted(labels - {enrich.NOT_APPLICABLE})
        paper.fields_of_study = real
        if real:
            fos_assigned += 1
    paper_author_ids: dict[int, set[int]] = {p.corpus_id: set() for p in papers}
    for node in author_nodes:
        for corpus_id, _ in node.mention_refs:
            paper_author_ids[corpus_id].add(node.author_id)
    enrich.mark_influential_citations(edges, paper_author_ids)
    influential = sum(1 for e in edges if e.is_influential)
    report.record(
        "enrich",
        fos_labels=len(fos_model.labels),
        fos_assigned=fos_assigned,
        influential=influential,
    )

    # Graph build + snapshot export.
    referenced_inst_ids = {i for node in author_nodes for i in node.affiliation_inst_ids}
    institutions = [r for r in registry if r.inst_id in referenced_inst_ids]
    try:
        graph = graphstore.build_graph(
            papers,
            author_nodes,
            venue_records,
            edges,
            institutions=institutions,
            embedding_dim=dim,
        )
    except StagError as exc:
        raise fail("graph", exc)
    manifest = graphstore.export_snapshot(graph, config.snapshot_dir, config.release_id)
    report.snapshot_path = str(Path(config.snapshot_dir) / config.release_id)
    report.release_id = config.release_id
    report.record(
        "export",
        **{name: info["records"] for name, info in manifest.datasets.items()},
    )

    if config.stage_dir is not None:
        write_jsonl(config.stage_dir / "papers.jsonl", (paper_to_record(p) for p in papers))
        write_jsonl(config.stage_dir / "citations.jsonl", (edge_to_record(e) for e in edges))
        write_jsonl(config.stage_dir / "authors.jsonl", (author_to_record(a) for a in author_nodes))
    return graph, report
