"""Parsing of heterogeneous source records into normalized paper mentions.

Input is JSONL, one paper object per line (optionally gzipped). Every record
must carry a title or at least one valid external ID; everything else is
optional and extraction is lossy by design.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import RecordError
from .text import normalize_text

# Closed set of external-ID kinds with per-kind syntax checks.
EXTERNAL_ID_PATTERNS: dict[str, re.Pattern] = {
    "DOI": re.compile(r"^10\..+/.+$"),
    "ARXIV": re.compile(r"^(\d{4}\.\d{4,5}(v\d+)?|[a-z][a-z-]*(\.[A-Za-z]{2})?/\d{7})$"),
    "PMID": re.compile(r"^\d+$"),
    "PMCID": re.compile(r"^PMC\d+$", re.IGNORECASE),
    "MAG": re.compile(r"^\d+$"),
    "ACL": re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$"),
}

_ID_KEY_ALIASES = {
    "doi": "DOI",
    "arxiv": "ARXIV",
    "pmid": "PMID",
    "pubmed": "PMID",
    "pmcid": "PMCID",
    "pubmedcentral": "PMCID",
    "mag": "MAG",
    "acl": "ACL",
}

_DATE_FULL = re.compile(r"^(\d{4})-(\d{2})-(\d{2})")
_DATE_MONTH = re.compile(r"^(\d{4})-(\d{2})$")
_DATE_YEAR = re.compile(r"^(\d{4})$")


@dataclass
class AuthorMention:
    """One author name as it appears on one source record."""

    raw_name: str
    position: int
    affiliation_raw: str = ""
    email: str | None = None


@dataclass
class BibEntry:
    """A decomposed bibliography entry; parsed fields may be empty."""

    raw: str
    title: str = ""
    author_names: list[str] = field(default_factory=list)
    year: int | None = None
    venue: str | None = None


@dataclass
class PaperMention:
    """One source record for a paper, the pre-deduplication unit of work."""

    mention_id: str
    source: str
    title: str = ""
    authors: list[AuthorMention] = field(default_factory=list)
    venue_raw: str = ""
    pub_date: str = ""
    date_precision: str = ""
    abstract: str = ""
    external_ids: dict[str, str] = field(default_factory=dict)
    pdf_hash: str | None = None
    bibliography: list[BibEntry] = field(default_factory=list)
    body_sentences: list[tuple[str, list[int]]] = field(default_factory=list)


@dataclass
class IngestReport:
    """Counters for one corpus load; accepted + rejected == read."""

    read: int = 0
    accepted: int = 0
    rejected: int = 0
    warnings: int = 0
    messages: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings += 1
        self.messages.append(message)


def _normalize_date(raw) -> tuple[str, str]:
    """Map a date string to (ISO date, precision); empty on failure."""
    if raw is None:
        return "", ""
    s = str(raw).strip()
    if not s:
        return "", ""
    m = _DATE_FULL.match(s)
    if m:
        y, mo, d = int(m.group(1)), int(m.group(2)), int(m.group(3))
        if 1 <= mo <= 12 and 1 <= d <= 31:
            return f"{y:04d}-{mo:02d}-{d:02d}", "day"
        return "", ""
    m = _DATE_MONTH.match(s)
    if m:
        y, mo = int(m.group(1)), int(m.group(2))
        if 1 <= mo <= 12:
            return f"{y:04d}-{mo:02d}-01", "month"
        return "", ""
    m = _DATE_YEAR.match(s)
    if m:
        return f"{int(m.group(1)):04d}-01-01", "year"
    return "", ""


def _parse_external_ids(raw_ids, report: IngestReport | None, context: str) -> dict[str, str]:
    ids: dict[str, str] = {}
    if not isinstance(raw_ids, dict):
        return ids
    for key, value in raw_ids.items():
        if value is None:
            continue
        kind = _ID_KEY_ALIASES.get(str(key).replace(" ", "").lower())
        if kind is None:
            if report is not None:
                report.warn(f"{context}: unknown external id key {key!r} dropped")
            continue
        value = str(value).strip()
        if not EXTERNAL_ID_PATTERNS[kind].match(value):
            if report is not None:
                report.warn(f"{context}: invalid {kind} value {value!r} dropped")
            continue
        ids[kind] = value
    return ids


def _parse_bib_entry(obj) -> BibEntry | None:
    if isinstance(obj, str):
        raw = obj.strip()
        return BibEntry(raw=raw) if raw else None
    if not isinstance(obj, dict):
        return None
    raw = str(obj.get("raw") or "").strip()
    title = str(obj.get("title") or "").strip()
    names = [str(n).strip() for n in obj.get("authors") or [] if str(n).strip()]
    year = obj.get("year")
    try:
        year = int(year) if year is not None else None
    except (TypeError, ValueError):
        year = None
    venue = obj.get("venue")
    venue = str(venue).strip() if venue else None
    if not raw:
        raw = " ".join(x for x in [title, ", ".join(names), str(year) if year else ""] if x)
    if not raw:
        return None
    return BibEntry(raw=raw, title=title, author_names=names, year=year, venue=venue)


def parse_record(raw_line: str, source: str, report: IngestReport | None = None) -> PaperMention:
    """Parse one JSONL line into a PaperMention.

    Raises RecordError on malformed JSON or when both the title and all
    external IDs are missing. Invalid external IDs are dropped with a
    warning on the report rather than rejecting the record.
    """
    try:
        obj = json.loads(raw_line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")

    digest = hashlib.blake2b(
        (source + "\n" + raw_line.strip()).encode("utf-8"), digest_size=8
    ).hexdigest()
    mention_id = f"{source}:{digest}"

    title = str(obj.get("title") or "").strip()
    external_ids = _parse_external_ids(obj.get("externalIds"), report, mention_id)
    if not normalize_text(title) and not external_ids:
        raise RecordError("record has neither a usable title nor any valid external ID")

    authors: list[AuthorMention] = []
    for pos, a in enumerate(obj.get("authors") or []):
        if isinstance(a, str):
            name = a.strip()
            if name:
                authors.append(AuthorMention(raw_name=name, position=len(authors)))
            continue
        if not isinstance(a, dict):
            continue
        name = str(a.get("name") or "").strip()
        if not name:
            continue
        email = a.get("email")
        authors.append(
            AuthorMention(
                raw_name=name,
                position=len(authors),
                affiliation_raw=str(a.get("affiliation") or "").strip(),
                email=str(email).strip().lower() if email else None,
            )
        )

    pub_date, precision = _normalize_date(obj.get("date"))
    if obj.get("date") and not pub_date and report is not None:
        report.warn(f"{mention_id}: unparseable date {obj.get('date')!r} dropped")

    bibliography = []
    for entry in obj.get("bibliography") or []:
        parsed = _parse_bib_entry(entry)
        if parsed is not None:
            bibliography.append(parsed)

    body_sentences: list[tuple[str, list[int]]] = []
    for sent in obj.get("bodySentences") or []:
        if not isinstance(sent, dict):
            continue
        text_ = str(sent.get("text") or "").strip()
        if not text_:
            continue
        cites = []
        for idx in sent.get("cites") or []:
            try:
                idx = int(idx)
            except (TypeError, ValueError):
                continue
            if 0 <= idx < len(bibliography):
                cites.append(idx)
        body_sentences.append((text_, cites))

    pdf_hash = obj.get("pdfSha")
    return PaperMention(
        mention_id=mention_id,
        source=source,
        title=title,
        authors=authors,
        venue_raw=str(obj.get("venue") or "").strip(),
        pub_date=pub_date,
        date_precision=precision,
        abstract=str(obj.get("abstract") or "").strip(),
        external_ids=external_ids,
        pdf_hash=str(pdf_hash).strip() if pdf_hash else None,
        bibliography=bibliography,
        body_sentences=body_sentences,
    )


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def load_corpus(path: str | Path, source: str | None = None) -> tuple[list[PaperMention], IngestReport]:
    """Load one JSONL file (or every *.jsonl[.gz] in a directory).

    Returns accepted mentions in file order plus the ingest report. The
    source identifier defaults to the file stem. Duplicate mention IDs are
    rejected. Raises RecordError when a path cannot be read.
    """
    root = Path(path)
    if not root.exists():
        raise RecordError(f"corpus path does not exist: {root}")
    if root.is_dir():
        files = sorted(p for p in root.iterdir() if p.name.endswith((".jsonl", ".jsonl.gz")))
    else:
        files = [root]

    report = IngestReport()
    mentions: list[PaperMention] = []
    seen_ids: set[str] = set()
    for file_path in files:
        file_source = source or file_path.name.split(".")[0]
        try:
            handle = _open_text(file_path)
        except OSError as exc:
            raise RecordError(f"cannot read corpus file {file_path}: {exc}") from exc
        with handle:
            for line_no, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                report.read += 1
                try:
                    mention = parse_record(line, file_source, report)
                except RecordError as exc:
                    report.rejected += 1
                    report.messages.append(f"{file_path.name}:{line_no}: rejected: {exc}")
                    continue
                if mention.mention_id in seen_ids:
                    report.rejected += 1
                    report.messages.append(f"{file_path.name}:{line_no}: rejected: duplicate mention id")
                    continue
                seen_ids.add(mention.mention_id)
                report.accepted += 1
                mentions.append(mention)
    return mentions, report


def iter_mentions(path: str | Path, source: str | None = None) -> Iterator[PaperMention]:
    """Convenience streaming wrapper over load_corpus."""
    mentions, _ = load_corpus(path, source)
    return iter(mentions)
