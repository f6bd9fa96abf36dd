"""HTTP API over a pinned graph snapshot: graph access, recommendations,
peer review, and dataset downloads.

Handlers are pure functions of (graph version, request, seed), so responses
are replayable; the stdlib threading HTTP server carries them. Requests
authenticate with an ``x-api-key`` header; unauthenticated clients share a
fixed-window per-IP rate limit.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from . import graphstore, recommend
from .dedup import Paper
from .errors import (
    BadIdentifierError,
    BadRequestError,
    NotScorableError,
    StagError,
)
from .graphstore import Graph, SnapshotManifest

DEFAULT_RATE_LIMIT = 100
DEFAULT_PAGE_LIMIT = 100

PAPER_FIELDS = {
    "title",
    "abstract",
    "venue",
    "venueId",
    "year",
    "publicationDate",
    "fieldsOfStudy",
    "externalIds",
    "authors",
}
AUTHOR_FIELDS = {"name", "paperCount", "affiliations"}

_SAFE_NAME_RE = re.compile(r"^[\w.\-]+$")


@dataclass
class ApiConfig:
    """Service configuration; see the README for the config file keys."""

    snapshots_root: str | Path
    host: str = "127.0.0.1"
    port: int = 8000
    api_keys: set[str] = field(default_factory=set)
    unauth_rate_limit: int = DEFAULT_RATE_LIMIT
    max_page_limit: int = DEFAULT_PAGE_LIMIT

    def __post_init__(self):
        if self.unauth_rate_limit <= 0:
            raise BadRequestError("rate limit must be positive")
        if not 1 <= self.max_page_limit <= 1000:
            raise BadRequestError("max page limit must be in [1, 1000]")


class RateLimiter:
    """Fixed-window request counter per client key."""

    def __init__(self, limit_per_minute: int, clock=time.time):
        self.limit = limit_per_minute
        self.clock = clock
        self._counts: dict[tuple[str, int], int] = {}
        self._lock = threading.Lock()

    def allow(self, client_key: str) -> bool:
        window = int(self.clock() // 60)
        with self._lock:
            stale = [k for k in self._counts if k[1] < window - 1]
            for k in stale:
                del self._counts[k]
            key = (client_key, window)
            count = self._counts.get(key, 0) + 1
            self._counts[key] = count
            return count <= self.limit


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _bad_request(message: str) -> ApiError:
    return ApiError(400, message)


def _not_found(message: str) -> ApiError:
    return ApiError(404, message)


def _int_param(params: dict, name: str, default: int) -> int:
    raw = params.get(name)
    if raw is None:
        return default
    try:
        return int(raw[0] if isinstance(raw, list) else raw)
    except (TypeError, ValueError):
        raise _bad_request(f"parameter {name} must be an integer")


class ApiService:
    """Route dispatch over one pinned graph version plus snapshot files."""

    def __init__(self, graph: Graph, config: ApiConfig, clock=time.time):
        self.graph = graph
        self.config = config
        self.limiter = RateLimiter(config.unauth_rate_limit, clock=clock)

    # -- field selection -----------------------------------------------------

    def _paper_payload(self, paper: Paper, fields: set[str]) -> dict:
        out: dict = {"corpusId": paper.corpus_id}
        for name in fields:
            if name == "title":
                out["title"] = paper.title
            elif name == "abstract":
                out["abstract"] = paper.abstract or None
            elif name == "venue":
                venue = self.graph.venues.get(paper.venue_id) if paper.venue_id else None
                out["venue"] = venue.canonical_name if venue else (paper.venue_raw or None)
            elif name == "venueId":
                out["venueId"] = paper.venue_id
            elif name == "year":
                out["year"] = paper.year
            elif name == "publicationDate":
                out["publicationDate"] = paper.pub_date or None
            elif name == "fieldsOfStudy":
                out["fieldsOfStudy"] = sorted(paper.fields_of_study) or None
            elif name == "externalIds":
                out["externalIds"] = dict(paper.external_ids)
            elif name == "authors":
                out["authors"] = [
                    {
                        "authorId": self.graph.author_by_ref.get(
                            (paper.corpus_id, a.position)
                        ),
                        "name": a.raw_name,
                    }
                    for a in paper.authors
                ]
        return out

    def _author_payload(self, author_id: int, fields: set[str]) -> dict:
        author = self.graph.authors[author_id]
        out: dict = {"authorId": author_id}
        for name in fields:
            if name == "name":
                out["name"] = author.canonical_name
            elif name == "paperCount":
                out["paperCount"] = len(self.graph.author_papers[author_id])
            elif name == "affiliations":
                out["affiliations"] = sorted(author.affiliation_inst_ids)
        return out

    @staticmethod
    def _parse_fields(params: dict, allowed: set[str], default: set[str]) -> set[str]:
        raw = params.get("fields")
        if raw is None:
            return default
        value = raw[0] if isinstance(raw, list) else raw
        names = {f.strip() for f in value.split(",") if f.strip()}
        unknown = names - allowed
        if unknown:
            raise _bad_request(f"unknown fields: {','.join(sorted(unknown))}")
        return names

    # -- route handlers --------------------------------------------------------

    def _resolve_paper(self, identifier: str) -> Paper:
        try:
            paper = graphstore.get_paper(self.graph, unquote(identifier))
        except BadIdentifierError as exc:
            raise _bad_request(str(exc))
        if paper is None:
            raise _not_found(f"paper {identifier!r} not found")
        return paper

    def _resolve_author_id(self, raw: str) -> int:
        if not raw.isdigit():
            raise _bad_request(f"author id must be an integer, got {raw!r}")
        author_id = int(raw)
        if author_id not in self.graph.authors:
            raise _not_found(f"author {author_id} not found")
        return author_id

    def _limit(self, params: dict) -> int:
        limit = _int_param(params, "limit", self.config.max_page_limit)
        if limit < 1 or limit > self.config.max_page_limit:
            raise _bad_request(f"limit must be in [1, {self.config.max_page_limit}]")
        return limit

    def _paper_search(self, params: dict):
        query = (params.get("query") or [""])[0]
        year_range = None
        raw_year = params.get("year")
        if raw_year:
            m = re.match(r"^(\d{4})(?:-(\d{4}))?$", raw_year[0])
            if not m:
                raise _bad_request("year must be YYYY or YYYY-YYYY")
            year_range = (int(m.group(1)), int(m.group(2) or m.group(1)))
        fos = None
        if params.get("fieldsOfStudy"):
            fos = [f for f in params["fieldsOfStudy"][0].split(",") if f]
        venue = params.get("venue", [None])[0]
        offset = _int_param(params, "offset", 0)
        limit = self._limit(params)
        fields = self._parse_fields(params, PAPER_FIELDS, {"title"})
        try:
            hits, total = graphstore.search_papers(
                self.graph,
                query,
                year_range=year_range,
                fields_of_study=fos,
                venue_id=venue,
                offset=offset,
                limit=limit,
            )
        except BadRequestError as exc:
            raise _bad_request(str(exc))
        return {
            "total": total,
            "offset": offset,
            "data": [self._paper_payload(self.graph.papers[cid], fields) for cid, _ in hits],
        }

    def _author_search(self, params: dict):
        query = (params.get("query") or [""])[0]
        offset = _int_param(params, "offset", 0)
        limit = self._limit(params)
        fields = self._parse_fields(params, AUTHOR_FIELDS, {"name"})
        try:
            hits, total = graphstore.search_authors(self.graph, query, offset, limit)
        except BadRequestError as exc:
            raise _bad_request(str(exc))
        return {
            "total": total,
            "offset": offset,
            "data": [self._author_payload(aid, fields) for aid, _ in hits],
        }

    def _citation_page(self, identifier: str, params: dict, direction: str):
        paper = self._resolve_paper(identifier)
        offset = _int_param(params, "offset", 0)
        limit = self._limit(params)
        fields = self._parse_fields(params, PAPER_FIELDS, {"title"})
        try:
            if direction == "citations":
                edges, total = graphstore.get_citations(self.graph, paper.corpus_id, offset, limit)
            else:
                edges, total = graphstore.get_references(self.graph, paper.corpus_id, offset, limit)
        except BadRequestError as exc:
            raise _bad_request(str(exc))
        data = []
        for edge in edges:
            other = edge.citing if direction == "citations" else edge.cited
            entry = {
                "contexts": list(edge.contexts),
                "intent": edge.intent,
                "isInfluential": edge.is_influential,
            }
            key = "citingPaper" if direction == "citations" else "citedPaper"
            entry[key] = self._paper_payload(self.graph.papers[other], fields)
            data.append(entry)
        return {"total": total, "offset": offset, "data": data}

    def _author_papers(self, raw_id: str, params: dict):
        author_id = self._resolve_author_id(raw_id)
        offset = _int_param(params, "offset", 0)
        limit = self._limit(params)
        fields = self._parse_fields(params, PAPER_FIELDS, {"title"})
        papers = self.graph.author_papers[author_id]
        page = papers[offset : offset + limit]
        return {
            "total": len(papers),
            "offset": offset,
            "data": [self._paper_payload(self.graph.papers[cid], fields) for cid in page],
        }

    def _resolve_id_list(self, values, label: str) -> list[int]:
        out = []
        for value in values:
            if isinstance(value, int):
                identifier = f"CorpusId:{value}"
            else:
                identifier = str(value)
            try:
                paper = graphstore.get_paper(self.graph, identifier)
            except BadIdentifierError:
                paper = None
            if paper is None:
                raise _bad_request(f"unresolvable {label} paper id: {value!r}")
            out.append(paper.corpus_id)
        return out

    def _recommendations(self, body: dict):
        positives = self._resolve_id_list(body.get("positivePaperIds") or [], "positive")
        negatives = self._resolve_id_list(body.get("negativePaperIds") or [], "negative")
        limit = body.get("limit", 10)
        seed = body.get("seed", 0)
        now = body.get("now")
        if now is None:
            raise _bad_request("request must carry 'now' (ISO date) for the recency window")
        try:
            ranked = recommend.recommend(
                positives, negatives, self.graph, now, k=int(limit), seed=int(seed)
            )
        except BadRequestError as exc:
            raise _bad_request(str(exc))
        fields = {"title", "year", "authors"}
        out = []
        for cid, score in ranked:
            payload = self._paper_payload(self.graph.papers[cid], fields)
            payload["score"] = score
            out.append(payload)
        return {"recommendedPapers": out}

    def _peer_review(self, body: dict):
        reviewers = body.get("reviewers") or []
        submissions = body.get("submissions") or []
        if not reviewers or not submissions:
            raise _bad_request("reviewers and submissions must be non-empty")
        reviewer_ids = []
        for raw in reviewers:
            try:
                rid = int(raw)
            except (TypeError, ValueError):
                raise _bad_request(f"bad reviewer id {raw!r}")
            if rid not in self.graph.authors:
                raise _bad_request(f"unknown reviewer id: {rid}")
            reviewer_ids.append(rid)
        matrix = []
        for rid in reviewer_ids:
            row = []
            for sub in submissions:
                author_ids = [int(a) for a in sub.get("authorIds") or []]
                coi = recommend.coi_score(rid, author_ids, self.graph)
                try:
                    score = recommend.match_score(rid, sub, self.graph)
                except NotScorableError:
                    score = None
                row.append({"coi": coi, "matchScore": score})
            matrix.append(row)
        return {"scores": matrix}

    def _dataset_routes(self, parts: list[str]):
        root = Path(self.config.snapshots_root)
        if not parts:
            return graphstore.list_releases(root)
        release_id = parts[0]
        if not _SAFE_NAME_RE.match(release_id):
            raise _bad_request(f"bad release id {release_id!r}")
        manifest_path = root / release_id / "manifest.json"
        if not manifest_path.exists():
            raise _not_found(f"release {release_id} not found")
        if len(parts) == 1:
            return json.loads(manifest_path.read_text(encoding="utf-8"))
        if len(parts) == 4 and parts[1] == "dataset":
            manifest = SnapshotManifest.from_json(manifest_path.read_text(encoding="utf-8"))
            dataset, part = parts[2], parts[3]
            if dataset not in manifest.datasets or not _SAFE_NAME_RE.match(part):
                raise _not_found(f"dataset {dataset!r} not found in release {release_id}")
            names = {f["name"] for f in manifest.datasets[dataset]["files"]}
            if part not in names:
                raise _not_found(f"file {part!r} not found in dataset {dataset}")
            return ("application/gzip", (root / release_id / dataset / part).read_bytes())
        raise _not_found("unknown datasets route")

    # -- dispatch -------------------------------------------------------------

    def handle(
        self,
        method: str,
        path: str,
        params: dict,
        body: dict | None,
        headers: dict,
        client_ip: str,
    ) -> tuple[int, str, bytes]:
        """Returns (status, content_type, payload bytes)."""
        api_key = headers.get("x-api-key", "")
        authenticated = api_key in self.config.api_keys and bool(api_key)
        if not authenticated:
            if not self.limiter.allow(f"ip:{client_ip}"):
                return self._error(429, "rate limit exceeded")
        try:
            result = self._route(method, path, params, body)
        except ApiError as exc:
            return self._error(exc.status, exc.message)
        except StagError as exc:
            return self._error(400, str(exc))
        if isinstance(result, tuple) and len(result) == 2 and isinstance(result[1], bytes):
            return 200, result[0], result[1]
        payload = json.dumps(result, sort_keys=True).encode("utf-8")
        return 200, "application/json", payload

    @staticmethod
    def _error(status: int, message: str) -> tuple[int, str, bytes]:
        return status, "application/json", json.dumps({"error": message}).encode("utf-8")

    def _route(self, method: str, path: str, params: dict, body: dict | None):
        parts = [unquote(p) for p in path.strip("/").split("/")]
        if method == "GET" and len(parts) >= 3 and parts[:2] == ["graph", "v1"]:
            if parts[2] == "paper" and len(parts) >= 4:
                if parts[3] == "search" and len(parts) == 4:
                    return self._paper_search(params)
                if parts[-1] in ("citations", "references") and len(parts) >= 5:
                    identifier = "/".join(parts[3:-1])
                    return self._citation_page(identifier, params, parts[-1])
                identifier = "/".join(parts[3:])
                fields = self._parse_fields(params, PAPER_FIELDS, {"title"})
                return self._paper_payload(self._resolve_paper(identifier), fields)
            if parts[2] == "author" and len(parts) >= 4:
                if parts[3] == "search" and len(parts) == 4:
                    return self._author_search(params)
                if len(parts) == 5 and parts[4] == "papers":
                    return self._author_papers(parts[3], params)
                if len(parts) == 4:
                    author_id = self._resolve_author_id(parts[3])
                    fields = self._parse_fields(params, AUTHOR_FIELDS, {"name"})
                    return self._author_payload(author_id, fields)
        if method == "POST" and parts == ["recommendations", "v1", "papers"]:
            return self._recommendations(body or {})
        if method == "POST" and parts == ["peer-review", "v1", "score"]:
            return self._peer_review(body or {})
        if method == "GET" and parts[:3] == ["datasets", "v1", "release"]:
            return self._dataset_routes(parts[3:])
        raise _not_found(f"no route for {method} {path}")


class _Handler(BaseHTTPRequestHandler):
    service: ApiService

    def log_message(self, *args):
        pass

    def _dispatch(self, method: str):
        split = urlsplit(self.path)
        params = parse_qs(split.query)
        body = None
        if method == "POST":
            length = int(self.headers.get("content-length") or 0)
            raw = self.rfile.read(length) if length else b""
            if raw:
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    self._write(400, "application/json", b'{"error": "invalid JSON body"}')
                    return
        headers = {k.lower(): v for k, v in self.headers.items()}
        status, ctype, payload = self.service.handle(
            method, split.path, params, body, headers, self.client_address[0]
        )
        self._write(status, ctype, payload)

    def _write(self, status: int, ctype: str, payload: bytes):
        self.send_response(status)
        self.send_header("content-type", ctype)
        self.send_header("content-length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def load_graph_for_config(config: ApiConfig) -> Graph:
    """Import the newest release under the configured snapshots root."""
    releases = graphstore.list_releases(config.snapshots_root)
    if not releases:
        raise StagError(f"no snapshot releases under {config.snapshots_root}")
    return graphstore.import_snapshot(Path(config.snapshots_root) / releases[-1])


def serve(config: ApiConfig, graph: Graph | None = None, clock=time.time) -> ThreadingHTTPServer:
    """Build a ready-to-run HTTP server over the configured snapshot.

    Importing the snapshot happens here, so a bad snapshot is a startup
    failure. Call ``serve_forever()`` on the result (or run it in a
    thread); ``server_address`` carries the bound port.
    """
    if graph is None:
        graph = load_graph_for_config(config)
    service = ApiService(graph, config, clock=clock)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((config.host, config.port), handler)
    server.service = service  # type: ignore[attr-defined]
    return server
