"""In-memory knowledge graph with keyword search and snapshot export/import.

The graph is immutable once built; every reference is validated at build
time. Snapshots are directories of gzipped JSONL datasets plus a manifest
with record counts and digests; serialization is canonical (sorted keys,
zeroed gzip mtime) so export -> import -> export is byte-identical.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .authors import Author
from .citelink import CitationEdge
from .dedup import Paper
from .errors import (
    BadIdentifierError,
    BadRequestError,
    CorruptSnapshotError,
    IntegrityError,
    NotFoundError,
)
from .ingest import EXTERNAL_ID_PATTERNS, AuthorMention
from .kbnorm import InstitutionRecord, VenueRecord
from .text import edit_ratio, jaccard, normalize_text

DATASET_NAMES = [
    "papers",
    "abstracts",
    "authors",
    "citations",
    "embeddings",
    "paper-ids",
    "publication-venues",
    "tldrs",
]

MAX_PAGE_LIMIT = 1000
TITLE_TF_WEIGHT = 3.0

_CORPUS_ID_RE = re.compile(r"^\d+$")


@dataclass
class SnapshotManifest:
    """Release metadata: datasets, per-file record counts and digests."""

    release_id: str
    datasets: dict[str, dict]
    embedding_dim: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "releaseId": self.release_id,
                "embeddingDim": self.embedding_dim,
                "datasets": self.datasets,
            },
            sort_keys=True,
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SnapshotManifest":
        obj = json.loads(text)
        return cls(
            release_id=str(obj["releaseId"]),
            datasets=dict(obj["datasets"]),
            embedding_dim=obj.get("embeddingDim"),
        )


class Graph:
    """Immutable bibliographic graph with bidirectional citation indexes."""

    def __init__(
        self,
        papers: dict[int, Paper],
        authors: dict[int, Author],
        venues: dict[str, VenueRecord],
        institutions: dict[str, InstitutionRecord],
        edges: list[CitationEdge],
        embedding_dim: int | None = None,
    ):
        self.papers = papers
        self.authors = authors
        self.venues = venues
        self.institutions = institutions
        self.edges = edges
        self.embedding_dim = embedding_dim
        # Derived indexes.
        self.cited_by: dict[int, list[CitationEdge]] = {}
        self.refs_of: dict[int, list[CitationEdge]] = {}
        for edge in edges:
            self.cited_by.setdefault(edge.cited, []).append(edge)
            self.refs_of.setdefault(edge.citing, []).append(edge)
        for lst in self.cited_by.values():
            lst.sort(key=lambda e: e.citing)
        for lst in self.refs_of.values():
            lst.sort(key=lambda e: e.cited)
        self.external_id_map: dict[tuple[str, str], int] = {}
        for cid in sorted(papers):
            for kind, value in papers[cid].external_ids.items():
                key = (kind, value.lower() if kind == "DOI" else value)
                if key in self.external_id_map:
                    raise IntegrityError(
                        f"external id {key} claimed by papers "
                        f"{self.external_id_map[key]} and {cid}"
                    )
                self.external_id_map[key] = cid
        self.paper_author_ids: dict[int, set[int]] = {cid: set() for cid in papers}
        self.author_by_ref: dict[tuple[int, int], int] = {}
        for aid in sorted(authors):
            for ref in authors[aid].mention_refs:
                self.paper_author_ids[ref[0]].add(aid)
                self.author_by_ref[ref] = aid
        self.author_papers: dict[int, list[int]] = {
            aid: sorted({ref[0] for ref in authors[aid].mention_refs}) for aid in authors
        }
        # Search index: token -> {corpus_id: (title_tf, abstract_tf)}.
        self.postings: dict[str, dict[int, tuple[int, int]]] = {}
        for cid in sorted(papers):
            paper = papers[cid]
            title_tokens = normalize_text(paper.title).split()
            abstract_tokens = normalize_text(paper.abstract).split()
            counts: dict[str, list[int]] = {}
            for tok in title_tokens:
                counts.setdefault(tok, [0, 0])[0] += 1
            for tok in abstract_tokens:
                counts.setdefault(tok, [0, 0])[1] += 1
            for tok, (tt, ta) in counts.items():
                self.postings.setdefault(tok, {})[cid] = (tt, ta)

    def ordered_author_ids(self, corpus_id: int) -> list[int]:
        """Author ids of a paper in author-list position order."""
        paper = self.papers[corpus_id]
        out = []
        for position in range(len(paper.authors)):
            aid = self.author_by_ref.get((corpus_id, position))
            if aid is not None:
                out.append(aid)
        return out


def build_graph(
    papers: list[Paper],
    authors: list[Author],
    venues: list[VenueRecord],
    edges: list[CitationEdge],
    institutions: list[InstitutionRecord] | None = None,
    embedding_dim: int | None = None,
) -> Graph:
    """Assemble and validate the graph; any dangling reference is fatal.

    Only institutions actually referenced by an author affiliation are kept
    (the registry itself is a pipeline input, not graph state).
    """
    paper_map: dict[int, Paper] = {}
    for paper in papers:
        if paper.corpus_id in paper_map:
            raise IntegrityError(f"duplicate corpus id {paper.corpus_id}")
        if not paper.member_mentions:
            raise IntegrityError(f"paper {paper.corpus_id} has no member mentions")
        paper_map[paper.corpus_id] = paper
    author_map: dict[int, Author] = {}
    for author in authors:
        if author.author_id in author_map:
            raise IntegrityError(f"duplicate author id {author.author_id}")
        if not author.mention_refs:
            raise IntegrityError(f"author {author.author_id} has no mentions")
        author_map[author.author_id] = author
    venue_map = {v.venue_id: v for v in venues}
    if len(venue_map) != len(venues):
        raise IntegrityError("duplicate venue ids in venue list")
    inst_map = {r.inst_id: r for r in institutions or []}

    seen_refs: set[tuple[int, int]] = set()
    for author in author_map.values():
        for corpus_id, position in author.mention_refs:
            if corpus_id not in paper_map:
                raise IntegrityError(
                    f"author {author.author_id} references missing paper {corpus_id}"
                )
            if position >= len(paper_map[corpus_id].authors):
                raise IntegrityError(
                    f"author {author.author_id} references position {position} "
                    f"beyond paper {corpus_id} author list"
                )
            if (corpus_id, position) in seen_refs:
                raise IntegrityError(
                    f"paper-author slot ({corpus_id}, {position}) claimed twice"
                )
            seen_refs.add((corpus_id, position))
        for inst_id in author.affiliation_inst_ids:
            if inst_id not in inst_map:
                raise IntegrityError(
                    f"author {author.author_id} references missing institution {inst_id}"
                )

    for paper in paper_map.values():
        if paper.venue_id is not None and paper.venue_id not in venue_map:
            raise IntegrityError(
                f"paper {paper.corpus_id} references missing venue {paper.venue_id}"
            )

    seen_pairs: set[tuple[int, int]] = set()
    for edge in edges:
        if edge.citing == edge.cited:
            raise IntegrityError(f"self-citation edge on paper {edge.citing}")
        if edge.citing not in paper_map or edge.cited not in paper_map:
            raise IntegrityError(
                f"citation edge ({edge.citing}, {edge.cited}) has a missing endpoint"
            )
        pair = (edge.citing, edge.cited)
        if pair in seen_pairs:
            raise IntegrityError(f"duplicate citation edge {pair}")
        seen_pairs.add(pair)

    referenced = sorted(
        {i for a in author_map.values() for i in a.affiliation_inst_ids}
    )
    kept_institutions = {i: inst_map[i] for i in referenced}
    return Graph(
        papers=paper_map,
        authors=author_map,
        venues=venue_map,
        institutions=kept_institutions,
        edges=sorted(edges, key=lambda e: (e.citing, e.cited)),
        embedding_dim=embedding_dim,
    )


def parse_identifier(identifier: str) -> tuple[str, str]:
    """Split 'CorpusId:7' / 'DOI:10.1/x' style ids; validates syntax."""
    if not isinstance(identifier, str) or ":" not in identifier:
        raise BadIdentifierError(f"malformed identifier {identifier!r}")
    kind, value = identifier.split(":", 1)
    kind_norm = kind.strip().lower()
    value = value.strip()
    if not value:
        raise BadIdentifierError(f"empty value in identifier {identifier!r}")
    if kind_norm == "corpusid":
        if not _CORPUS_ID_RE.match(value):
            raise BadIdentifierError(f"corpus id must be an integer, got {value!r}")
        return "CORPUS", value
    kind_upper = kind.strip().upper()
    if kind_upper not in EXTERNAL_ID_PATTERNS:
        raise BadIdentifierError(f"unknown identifier kind {kind!r}")
    if not EXTERNAL_ID_PATTERNS[kind_upper].match(value):
        raise BadIdentifierError(f"invalid {kind_upper} value {value!r}")
    return kind_upper, value


def get_paper(graph: Graph, identifier: str) -> Paper | None:
    """Resolve an internal or external identifier; None when absent."""
    kind, value = parse_identifier(identifier)
    if kind == "CORPUS":
        return graph.papers.get(int(value))
    if kind == "DOI":
        value = value.lower()
    cid = graph.external_id_map.get((kind, value))
    return graph.papers.get(cid) if cid is not None else None


def _page(
    edges: list[CitationEdge], offset: int, limit: int
) -> tuple[list[CitationEdge], int]:
    if limit < 1 or limit > MAX_PAGE_LIMIT:
        raise BadRequestError(f"limit must be in [1, {MAX_PAGE_LIMIT}]")
    if offset < 0:
        raise BadRequestError("offset must be >= 0")
    return edges[offset : offset + limit], len(edges)


def get_citations(
    graph: Graph, corpus_id: int, offset: int = 0, limit: int = 100
) -> tuple[list[CitationEdge], int]:
    """Edges citing this paper, ordered by citing corpus id."""
    if corpus_id not in graph.papers:
        raise NotFoundError(f"unknown corpus id {corpus_id}")
    return _page(graph.cited_by.get(corpus_id, []), offset, limit)


def get_references(
    graph: Graph, corpus_id: int, offset: int = 0, limit: int = 100
) -> tuple[list[CitationEdge], int]:
    """Edges cited by this paper, ordered by cited corpus id."""
    if corpus_id not in graph.papers:
        raise NotFoundError(f"unknown corpus id {corpus_id}")
    return _page(graph.refs_of.get(corpus_id, []), offset, limit)


def search_papers(
    graph: Graph,
    query: str,
    year_range: tuple[int, int] | None = None,
    fields_of_study: list[str] | None = None,
    venue_id: str | None = None,
    offset: int = 0,
    limit: int = 10,
) -> tuple[list[tuple[int, float]], int]:
    """TF-IDF keyword search with title terms weighted 3x.

    Filters are applied before ranking; ties break by ascending corpus id.
    """
    if limit < 1 or limit > MAX_PAGE_LIMIT:
        raise BadRequestError(f"limit must be in [1, {MAX_PAGE_LIMIT}]")
    if offset < 0:
        raise BadRequestError("offset must be >= 0")
    terms = normalize_text(query).split()
    if not terms:
        raise BadRequestError("empty query")

    def passes(paper: Paper) -> bool:
        if year_range is not None:
            year = paper.year
            if year is None or not (year_range[0] <= year <= year_range[1]):
                return False
        if fields_of_study is not None:
            if not set(fields_of_study) & set(paper.fields_of_study):
                return False
        if venue_id is not None and paper.venue_id != venue_id:
            return False
        return True

    n_docs = len(graph.papers)
    scores: dict[int, float] = {}
    for term in terms:
        postings = graph.postings.get(term)
        if not postings:
            continue
        idf = math.log(1.0 + n_docs / len(postings))
        for cid, (tf_title, tf_abstract) in postings.items():
            tf = TITLE_TF_WEIGHT * tf_title + tf_abstract
            scores[cid] = scores.get(cid, 0.0) + tf * idf
    ranked = sorted(
        ((cid, s) for cid, s in scores.items() if s > 0.0 and passes(graph.papers[cid])),
        key=lambda kv: (-kv[1], kv[0]),
    )
    return ranked[offset : offset + limit], len(ranked)


def search_authors(
    graph: Graph, query: str, offset: int = 0, limit: int = 10
) -> tuple[list[tuple[int, float]], int]:
    """Name search over authors; requires token overlap, ranks by similarity."""
    if limit < 1 or limit > MAX_PAGE_LIMIT:
        raise BadRequestError(f"limit must be in [1, {MAX_PAGE_LIMIT}]")
    if offset < 0:
        raise BadRequestError("offset must be >= 0")
    norm_query = normalize_text(query)
    if not norm_query:
        raise BadRequestError("empty query")
    query_tokens = frozenset(norm_query.split())
    ranked = []
    for aid in sorted(graph.authors):
        name = normalize_text(graph.authors[aid].canonical_name)
        name_tokens = frozenset(name.split())
        if not query_tokens & name_tokens:
            continue
        score = 0.5 * edit_ratio(norm_query, name) + 0.5 * jaccard(query_tokens, name_tokens)
        ranked.append((aid, score))
    ranked.sort(key=lambda kv: (-kv[1], kv[0]))
    return ranked[offset : offset + limit], len(ranked)


# --- Snapshot serialization -------------------------------------------------


def _canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _paper_record(paper: Paper, graph: Graph) -> dict:
    return {
        "corpusId": paper.corpus_id,
        "title": paper.title,
        "venueId": paper.venue_id,
        "venueRaw": paper.venue_raw,
        "pubDate": paper.pub_date,
        "datePrecision": paper.date_precision,
        "fieldsOfStudy": sorted(paper.fields_of_study),
        "authorIds": graph.ordered_author_ids(paper.corpus_id),
        "authors": [
            {"name": a.raw_name, "affiliation": a.affiliation_raw, "email": a.email}
            for a in paper.authors
        ],
        "memberMentions": list(paper.member_mentions),
    }


def _author_record(author: Author, graph: Graph) -> dict:
    return {
        "authorId": author.author_id,
        "name": author.canonical_name,
        "mentions": [[cid, pos] for cid, pos in author.mention_refs],
        "affiliations": [
            {
                "instId": inst.inst_id,
                "name": inst.name,
                "aliases": sorted(inst.aliases),
                "country": inst.country,
                "city": inst.city,
            }
            for inst in (
                graph.institutions[i] for i in sorted(author.affiliation_inst_ids)
            )
        ],
    }


def _dataset_records(graph: Graph, name: str):
    if name == "papers":
        for cid in sorted(graph.papers):
            yield _paper_record(graph.papers[cid], graph)
    elif name == "abstracts":
        for cid in sorted(graph.papers):
            if graph.papers[cid].abstract:
                yield {"corpusId": cid, "abstract": graph.papers[cid].abstract}
    elif name == "authors":
        for aid in sorted(graph.authors):
            yield _author_record(graph.authors[aid], graph)
    elif name == "citations":
        for edge in graph.edges:
            yield {
                "citing": edge.citing,
                "cited": edge.cited,
                "contexts": list(edge.contexts),
                "contextCiteCounts": list(edge.context_cite_counts),
                "intent": edge.intent,
                "isInfluential": edge.is_influential,
            }
    elif name == "embeddings":
        for cid in sorted(graph.papers):
            emb = graph.papers[cid].embedding
            if emb is not None:
                yield {"corpusId": cid, "vector": [float(x) for x in emb]}
    elif name == "paper-ids":
        items = sorted(graph.external_id_map.items())
        for (kind, value), cid in items:
            yield {"kind": kind, "value": value, "corpusId": cid}
    elif name == "publication-venues":
        for vid in sorted(graph.venues):
            venue = graph.venues[vid]
            yield {
                "id": venue.venue_id,
                "name": venue.canonical_name,
                "variants": sorted(venue.variants),
                "issn": venue.issn,
            }
    elif name == "tldrs":
        return
    else:
        raise ValueError(f"unknown dataset {name}")


def export_snapshot(graph: Graph, out_dir: str | Path, release_id: str) -> SnapshotManifest:
    """Write all datasets as gzipped JSONL under out_dir/release_id/.

    Serialization is canonical: sorted keys, no gzip timestamp, records in
    primary-id order. Returns the written manifest.
    """
    root = Path(out_dir) / release_id
    datasets: dict[str, dict] = {}
    for name in DATASET_NAMES:
        dataset_dir = root / name
        dataset_dir.mkdir(parents=True, exist_ok=True)
        part_path = dataset_dir / "part-000.jsonl.gz"
        count = 0
        buf = bytearray()
        for record in _dataset_records(graph, name):
            buf.extend(_canonical_dumps(record).encode("utf-8"))
            buf.extend(b"\n")
            count += 1
        with open(part_path, "wb") as fh:
            with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, compresslevel=9) as gz:
                gz.write(bytes(buf))
        digest = hashlib.sha256(part_path.read_bytes()).hexdigest()
        datasets[name] = {
            "files": [{"name": "part-000.jsonl.gz", "records": count, "sha256": digest}],
            "records": count,
        }
    manifest = SnapshotManifest(
        release_id=release_id, datasets=datasets, embedding_dim=graph.embedding_dim
    )
    (root / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def _read_dataset(root: Path, name: str, manifest: SnapshotManifest) -> list[dict]:
    info = manifest.datasets.get(name)
    if info is None:
        raise CorruptSnapshotError(f"manifest lists no dataset {name!r}")
    records: list[dict] = []
    for file_info in info["files"]:
        path = root / name / file_info["name"]
        if not path.exists():
            raise CorruptSnapshotError(f"missing dataset file {path}")
        data = path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != file_info["sha256"]:
            raise CorruptSnapshotError(
                f"digest mismatch for {path}: manifest {file_info['sha256']}, file {digest}"
            )
        text = gzip.decompress(data).decode("utf-8")
        for line in text.splitlines():
            if line.strip():
                records.append(json.loads(line))
    if len(records) != info["records"]:
        raise CorruptSnapshotError(
            f"dataset {name}: manifest says {info['records']} records, found {len(records)}"
        )
    return records


def import_snapshot(snapshot_dir: str | Path) -> Graph:
    """Rebuild a graph from a snapshot directory; digests must verify."""
    root = Path(snapshot_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise CorruptSnapshotError(f"no manifest.json under {root}")
    manifest = SnapshotManifest.from_json(manifest_path.read_text(encoding="utf-8"))

    abstracts = {
        r["corpusId"]: r["abstract"] for r in _read_dataset(root, "abstracts", manifest)
    }
    embeddings = {
        r["corpusId"]: np.asarray(r["vector"], dtype=np.float64)
        for r in _read_dataset(root, "embeddings", manifest)
    }
    id_map: dict[int, dict[str, str]] = {}
    for r in _read_dataset(root, "paper-ids", manifest):
        id_map.setdefault(r["corpusId"], {})[r["kind"]] = r["value"]

    papers = []
    for r in _read_dataset(root, "papers", manifest):
        cid = r["corpusId"]
        papers.append(
            Paper(
                corpus_id=cid,
                member_mentions=list(r["memberMentions"]),
                title=r["title"],
                abstract=abstracts.get(cid, ""),
                venue_raw=r["venueRaw"],
                venue_id=r["venueId"],
                pub_date=r["pubDate"],
                date_precision=r["datePrecision"],
                authors=[
                    AuthorMention(
                        raw_name=a["name"],
                        position=i,
                        affiliation_raw=a["affiliation"],
                        email=a["email"],
                    )
                    for i, a in enumerate(r["authors"])
                ],
                external_ids=id_map.get(cid, {}),
                fields_of_study=list(r["fieldsOfStudy"]),
                embedding=embeddings.get(cid),
            )
        )

    institutions: dict[str, InstitutionRecord] = {}
    authors = []
    for r in _read_dataset(root, "authors", manifest):
        inst_ids = set()
        for inst in r["affiliations"]:
            record = InstitutionRecord(
                inst_id=inst["instId"],
                name=inst["name"],
                aliases=set(inst["aliases"]),
                country=inst["country"],
                city=inst["city"],
            )
            existing = institutions.get(record.inst_id)
            if existing is not None and existing != record:
                raise IntegrityError(
                    f"conflicting embedded institution records for {record.inst_id}"
                )
            institutions[record.inst_id] = record
            inst_ids.add(record.inst_id)
        authors.append(
            Author(
                author_id=r["authorId"],
                canonical_name=r["name"],
                mention_refs=[(cid, pos) for cid, pos in r["mentions"]],
                affiliation_inst_ids=inst_ids,
            )
        )

    venues = [
        VenueRecord(
            venue_id=r["id"],
            canonical_name=r["name"],
            variants=set(r["variants"]),
            issn=r["issn"],
        )
        for r in _read_dataset(root, "publication-venues", manifest)
    ]
    edges = [
        CitationEdge(
            citing=r["citing"],
            cited=r["cited"],
            contexts=list(r["contexts"]),
            context_cite_counts=list(r["contextCiteCounts"]),
            intent=r["intent"],
            is_influential=r["isInfluential"],
        )
        for r in _read_dataset(root, "citations", manifest)
    ]
    _read_dataset(root, "tldrs", manifest)

    return build_graph(
        papers,
        authors,
        venues,
        edges,
        institutions=list(institutions.values()),
        embedding_dim=manifest.embedding_dim,
    )


def list_releases(snapshots_root: str | Path) -> list[str]:
    """Release ids available under a snapshots root directory."""
    root = Path(snapshots_root)
    if not root.exists():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "manifest.json").exists())


def graph_equal(a: Graph, b: Graph) -> bool:
    """Deep structural equality over all graph state."""
    if sorted(a.papers) != sorted(b.papers):
        return False
    for cid in a.papers:
        pa, pb = a.papers[cid], b.papers[cid]
        if (
            pa.member_mentions != pb.member_mentions
            or pa.title != pb.title
            or pa.abstract != pb.abstract
            or pa.venue_raw != pb.venue_raw
            or pa.venue_id != pb.venue_id
            or pa.pub_date != pb.pub_date
            or pa.date_precision != pb.date_precision
            or pa.external_ids != pb.external_ids
            or sorted(pa.fields_of_study) != sorted(pb.fields_of_study)
            or pa.authors != pb.authors
        ):
            return False
        ea, eb = pa.embedding, pb.embedding
        if (ea is None) != (eb is None):
            return False
        if ea is not None and not np.array_equal(ea, eb):
            return False
    if sorted(a.authors) != sorted(b.authors):
        return False
    for aid in a.authors:
        aa, ab = a.authors[aid], b.authors[aid]
        if (
            aa.canonical_name != ab.canonical_name
            or aa.mention_refs != ab.mention_refs
            or aa.affiliation_inst_ids != ab.affiliation_inst_ids
        ):
            return False
    if a.venues != b.venues or a.institutions != b.institutions:
        return False
    if len(a.edges) != len(b.edges):
        return False
    for ea, eb in zip(a.edges, b.edges):
        if (
            ea.citing != eb.citing
            or ea.cited != eb.cited
            or ea.contexts != eb.contexts
            or ea.context_cite_counts != eb.context_cite_counts
            or ea.intent != eb.intent
            or ea.is_influential != eb.is_influential
        ):
            return False
    return a.embedding_dim == b.embedding_dim
