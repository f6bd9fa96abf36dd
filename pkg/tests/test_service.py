import gzip
import hashlib
import json
import threading

import pytest
import requests

from stag import graphstore, recommend
from stag.service import ApiConfig, RateLimiter, serve


@pytest.fixture(scope="module")
def api(demo_pipeline):
    config = ApiConfig(
        snapshots_root=demo_pipeline["snapshots_root"],
        port=0,
        api_keys={"demo-key-1"},
        unauth_rate_limit=100000,
    )
    server = serve(config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    yield {"base": base, "graph": demo_pipeline["graph"], "demo": demo_pipeline}
    server.shutdown()


def get(api, path, **kw):
    return requests.get(api["base"] + path, timeout=30, **kw)


def post(api, path, body, **kw):
    return requests.post(api["base"] + path, json=body, timeout=60, **kw)


def test_paper_field_selection_exact(api):
    cid = min(api["graph"].papers)
    r = get(api, f"/graph/v1/paper/CorpusId:{cid}?fields=title,year")
    assert r.status_code == 200
    body = r.json()
    paper = api["graph"].papers[cid]
    assert body == {"corpusId": cid, "title": paper.title, "year": paper.year}


def test_paper_default_fields(api):
    cid = min(api["graph"].papers)
    body = get(api, f"/graph/v1/paper/CorpusId:{cid}").json()
    assert set(body) == {"corpusId", "title"}


def test_paper_unknown_field_rejected(api):
    cid = min(api["graph"].papers)
    r = get(api, f"/graph/v1/paper/CorpusId:{cid}?fields=title,bogus")
    assert r.status_code == 400
    assert "bogus" in r.json()["error"]


def test_paper_by_doi_and_unknown(api):
    graph = api["graph"]
    cid, doi = next(
        (c, p.external_ids["DOI"]) for c, p in sorted(graph.papers.items())
        if "DOI" in p.external_ids
    )
    r = get(api, f"/graph/v1/paper/DOI:{doi}")
    assert r.status_code == 200 and r.json()["corpusId"] == cid
    assert get(api, "/graph/v1/paper/DOI:10.9999/absent").status_code == 404
    r = get(api, "/graph/v1/paper/DOI:banana")
    assert r.status_code == 400
    assert "error" in r.json()


def test_citations_match_module(api):
    graph = api["graph"]
    cid = max(graph.cited_by, key=lambda c: len(graph.cited_by[c]))
    r = get(api, f"/graph/v1/paper/CorpusId:{cid}/citations?limit=5&fields=title")
    assert r.status_code == 200
    body = r.json()
    edges, total = graphstore.get_citations(graph, cid, 0, 5)
    assert body["total"] == total
    assert [e["citingPaper"]["corpusId"] for e in body["data"]] == [
        e.citing for e in edges
    ]
    for entry, edge in zip(body["data"], edges):
        assert entry["contexts"] == edge.contexts
        assert entry["isInfluential"] == edge.is_influential
        assert entry["intent"] == "unspecified"


def test_references_match_module(api):
    graph = api["graph"]
    cid = max(graph.refs_of, key=lambda c: len(graph.refs_of[c]))
    r = get(api, f"/graph/v1/paper/CorpusId:{cid}/references?limit=100")
    assert r.status_code == 200
    body = r.json()
    edges, total = graphstore.get_references(graph, cid, 0, 100)
    assert body["total"] == total
    assert [e["citedPaper"]["corpusId"] for e in body["data"]] == [
        e.cited for e in edges
    ]


def test_limit_above_service_cap_rejected(api):
    cid = min(api["graph"].papers)
    r = get(api, f"/graph/v1/paper/CorpusId:{cid}/citations?limit=1000")
    assert r.status_code == 400


def test_search_endpoint_matches_module(api):
    graph = api["graph"]
    title = graph.papers[min(graph.papers)].title
    query = " ".join(title.split()[:3])
    r = get(api, "/graph/v1/paper/search", params={"query": query, "limit": 10})
    assert r.status_code == 200
    hits, total = graphstore.search_papers(graph, query, limit=10)
    body = r.json()
    assert body["total"] == total
    assert [e["corpusId"] for e in body["data"]] == [cid for cid, _ in hits]


def test_search_requires_query(api):
    assert get(api, "/graph/v1/paper/search?query=").status_code == 400
    assert get(api, "/graph/v1/paper/search?query=%21%21").status_code == 400


def test_search_year_filter(api):
    graph = api["graph"]
    term = graph.papers[min(graph.papers)].title.split()[0]
    body = get(
        api, "/graph/v1/paper/search",
        params={"query": term, "year": "2020-2021", "fields": "year"},
    ).json()
    for entry in body["data"]:
        assert 2020 <= entry["year"] <= 2021
    assert get(api, "/graph/v1/paper/search?query=x&year=20ab").status_code == 400


def test_author_endpoints(api):
    graph = api["graph"]
    aid = min(graph.authors)
    body = get(api, f"/graph/v1/author/{aid}?fields=name,paperCount").json()
    assert body == {
        "authorId": aid,
        "name": graph.authors[aid].canonical_name,
        "paperCount": len(graph.author_papers[aid]),
    }
    papers = get(api, f"/graph/v1/author/{aid}/papers?limit=100").json()
    assert [e["corpusId"] for e in papers["data"]] == graph.author_papers[aid]
    assert get(api, "/graph/v1/author/999999").status_code == 404
    assert get(api, "/graph/v1/author/abc").status_code == 400


def test_author_search_endpoint(api):
    graph = api["graph"]
    aid = min(graph.authors)
    name = graph.authors[aid].canonical_name
    body = get(api, "/graph/v1/author/search", params={"query": name}).json()
    hits, _ = graphstore.search_authors(graph, name)
    assert [e["authorId"] for e in body["data"]] == [a for a, _ in hits]


def test_recommendations_match_module(api):
    graph = api["graph"]
    demo = api["demo"]
    now = demo["config"].now
    index = recommend.build_recent_index(graph, now)
    pos = [cid for cid in sorted(graph.papers) if cid not in set(index.corpus_ids)][:3]
    body = post(
        api,
        "/recommendations/v1/papers",
        {
            "positivePaperIds": [f"CorpusId:{c}" for c in pos],
            "negativePaperIds": [],
            "limit": 5,
            "seed": 3,
            "now": now,
        },
    )
    assert body.status_code == 200
    got = body.json()["recommendedPapers"]
    want = recommend.recommend(pos, [], graph, now, k=5, seed=3)
    assert [e["corpusId"] for e in got] == [cid for cid, _ in want]
    assert [e["score"] for e in got] == pytest.approx([s for _, s in want])
    window = set(index.corpus_ids)
    for entry in got:
        assert entry["corpusId"] in window


def test_recommendations_errors(api):
    r = post(api, "/recommendations/v1/papers",
             {"positivePaperIds": [], "now": "2023-01-15"})
    assert r.status_code == 400
    r = post(api, "/recommendations/v1/papers",
             {"positivePaperIds": ["CorpusId:999999"], "now": "2023-01-15"})
    assert r.status_code == 400
    assert "999999" in r.json()["error"]


def test_peer_review_matches_module(api):
    graph = api["graph"]
    reviewers = sorted(graph.authors)[:2]
    submissions = []
    for cid in sorted(graph.papers)[:3]:
        paper = graph.papers[cid]
        submissions.append(
            {
                "title": paper.title,
                "abstract": paper.abstract,
                "authorIds": sorted(graph.paper_author_ids[cid]),
            }
        )
    r = post(api, "/peer-review/v1/score",
             {"reviewers": reviewers, "submissions": submissions})
    assert r.status_code == 200
    matrix = r.json()["scores"]
    assert len(matrix) == 2 and all(len(row) == 3 for row in matrix)
    for i, reviewer in enumerate(reviewers):
        for j, sub in enumerate(submissions):
            cell = matrix[i][j]
            assert cell["coi"] == recommend.coi_score(reviewer, sub["authorIds"], graph)
            assert cell["matchScore"] == pytest.approx(
                recommend.match_score(reviewer, sub, graph)
            )


def test_peer_review_coi_cell_is_one_for_coauthor(api):
    graph = api["graph"]
    cid = next(c for c in sorted(graph.papers) if len(graph.paper_author_ids[c]) >= 2)
    authors = sorted(graph.paper_author_ids[cid])
    r = post(api, "/peer-review/v1/score",
             {"reviewers": [authors[0]],
              "submissions": [{"title": "x", "abstract": "", "authorIds": [authors[1]]}]})
    assert r.json()["scores"][0][0]["coi"] == 1


def test_peer_review_unknown_reviewer(api):
    r = post(api, "/peer-review/v1/score",
             {"reviewers": [999999], "submissions": [{"title": "x", "authorIds": []}]})
    assert r.status_code == 400
    assert "999999" in r.json()["error"]


def test_datasets_listing_and_download(api):
    demo = api["demo"]
    releases = get(api, "/datasets/v1/release").json()
    assert releases == [demo["release_id"]]
    manifest = get(api, f"/datasets/v1/release/{demo['release_id']}").json()
    assert set(manifest["datasets"]) == {
        "papers", "abstracts", "authors", "citations", "embeddings",
        "paper-ids", "publication-venues", "tldrs",
    }
    info = manifest["datasets"]["papers"]["files"][0]
    r = get(
        api,
        f"/datasets/v1/release/{demo['release_id']}/dataset/papers/{info['name']}",
    )
    assert r.status_code == 200
    assert r.headers["content-type"] == "application/gzip"
    assert hashlib.sha256(r.content).hexdigest() == info["sha256"]
    records = [json.loads(l) for l in gzip.decompress(r.content).decode().splitlines()]
    assert len(records) == info["records"]


def test_datasets_unknown_names(api):
    demo = api["demo"]
    assert get(api, "/datasets/v1/release/none-such").status_code == 404
    assert get(
        api, f"/datasets/v1/release/{demo['release_id']}/dataset/nope/part-000.jsonl.gz"
    ).status_code == 404


def test_unknown_route_404(api):
    assert get(api, "/graph/v1/unknown").status_code == 404
    assert get(api, "/totally/else").status_code == 404


def test_rate_limiter_unit():
    t = [1000.0]
    limiter = RateLimiter(2, clock=lambda: t[0])
    assert limiter.allow("ip:1") and limiter.allow("ip:1")
    assert not limiter.allow("ip:1")
    assert limiter.allow("ip:2")  # separate client
    t[0] += 60.0  # window rolls over
    assert limiter.allow("ip:1")


def test_rate_limit_429_and_key_bypass(demo_pipeline):
    config = ApiConfig(
        snapshots_root=demo_pipeline["snapshots_root"],
        port=0,
        api_keys={"demo-key-1"},
        unauth_rate_limit=3,
    )
    server = serve(config, graph=demo_pipeline["graph"], clock=lambda: 5000.0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    try:
        cid = min(demo_pipeline["graph"].papers)
        path = f"{base}/graph/v1/paper/CorpusId:{cid}"
        codes = [requests.get(path, timeout=30).status_code for _ in range(4)]
        assert codes[:3] == [200, 200, 200]
        assert codes[3] == 429
        authed = requests.get(path, headers={"x-api-key": "demo-key-1"}, timeout=30)
        assert authed.status_code == 200
    finally:
        server.shutdown()


def test_startup_failure_on_bad_snapshot(tmp_path):
    from stag.errors import StagError

    config = ApiConfig(snapshots_root=tmp_path, port=0)
    with pytest.raises(StagError):
        serve(config)
