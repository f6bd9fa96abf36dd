import random
from datetime import date, timedelta
from pathlib import Path

import pytest

from stag.authors import Author
from stag.citelink import CitationEdge
from stag.dedup import Paper
from stag.enrich import assign_embeddings
from stag.graphstore import build_graph
from stag.ingest import AuthorMention
from stag.kbnorm import InstitutionRecord, VenueRecord

REPO_ROOT = Path(__file__).resolve().parent.parent


def make_random_graph(seed: int, n_papers: int = 40, embedding_dim: int = 32):
    """A small consistent random graph for oracle comparisons."""
    rng = random.Random(seed)
    words = ["w%03d" % i for i in range(120)]
    n_authors = max(3, n_papers // 3)
    venue = VenueRecord(venue_id="v1", canonical_name="Fixture Venue", variants=set())
    inst = InstitutionRecord(inst_id="i1", name="Fixture Institute")
    papers = []
    author_refs: dict[int, list[tuple[int, int]]] = {a: [] for a in range(1, n_authors + 1)}
    base = date(2022, 6, 1)
    for cid in range(1, n_papers + 1):
        team = rng.sample(range(1, n_authors + 1), rng.randint(1, 3))
        papers.append(
            Paper(
                corpus_id=cid,
                member_mentions=[f"m{cid}"],
                title=" ".join(rng.choice(words) for _ in range(6)),
                abstract=" ".join(rng.choice(words) for _ in range(20)),
                venue_id="v1" if rng.random() < 0.5 else None,
                pub_date=(base + timedelta(days=rng.randint(0, 300))).isoformat(),
                date_precision="day",
                authors=[AuthorMention(f"Author {a}", i) for i, a in enumerate(team)],
                external_ids={"DOI": f"10.50/{seed}.{cid}"},
                fields_of_study=rng.sample(["Physics", "Biology"], rng.randint(0, 2)),
            )
        )
        for i, a in enumerate(team):
            author_refs[a].append((cid, i))
    assign_embeddings(papers, embedding_dim)
    authors = [
        Author(
            author_id=a,
            canonical_name=f"Author {a}",
            mention_refs=sorted(refs),
            affiliation_inst_ids={"i1"} if a % 3 == 0 else set(),
        )
        for a, refs in author_refs.items()
        if refs
    ]
    edges = []
    seen = set()
    for _ in range(n_papers * 2):
        citing, cited = rng.randint(1, n_papers), rng.randint(1, n_papers)
        if citing == cited or (citing, cited) in seen:
            continue
        seen.add((citing, cited))
        n_ctx = rng.randint(0, 3)
        edges.append(
            CitationEdge(
                citing=citing,
                cited=cited,
                contexts=[f"Context {k} cites [0]." for k in range(n_ctx)],
                context_cite_counts=[rng.randint(1, 3) for _ in range(n_ctx)],
                is_influential=rng.random() < 0.2,
            )
        )
    return build_graph(
        papers, authors, [venue], edges, institutions=[inst], embedding_dim=embedding_dim
    )


@pytest.fixture(scope="session")
def random_graph():
    return make_random_graph(1234)


@pytest.fixture(scope="session")
def demo_pipeline(tmp_path_factory):
    """One full demo pipeline run shared by CLI/service/acceptance tests."""
    from stag.config import PipelineConfig
    from stag.pipeline import run_pipeline

    out = tmp_path_factory.mktemp("demo-run")
    config = PipelineConfig.from_file(REPO_ROOT / "demo" / "pipeline.toml")
    config.snapshot_dir = out / "snapshots"
    config.stage_dir = out / "stages"
    graph, report = run_pipeline(config)
    return {
        "graph": graph,
        "report": report,
        "snapshots_root": out / "snapshots",
        "release_dir": out / "snapshots" / config.release_id,
        "release_id": config.release_id,
        "config": config,
    }
