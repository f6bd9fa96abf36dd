"""Venue and affiliation normalization against prepared knowledge bases.

Venue matching is exact lookup over an index of known variant titles
(including serial-title abbreviations); all fuzziness lives in variant
enumeration, never in the lookup. Affiliations are parsed by rules into
main/child/address parts and linked to a research-organization registry by
token-overlap retrieval plus a weighted ranker.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import RecordError
from .text import edit_ratio, jaccard, normalize_text

AFFILIATION_ACCEPT_THRESHOLD = 0.5
RETRIEVAL_TOP_K = 100

# Words dropped entirely when abbreviating serial titles.
_ISO4_DROP = frozenset(
    """a an the and or of in on for with der die das la le les el los de du
    des di della delle dei da em no und et und y i og""".split()
)

_ORDINAL_RE = re.compile(r"\b\d+(st|nd|rd|th)\b", re.IGNORECASE)
_YEAR_RE = re.compile(r"\b(19|20)\d{2}\b")
_PROCEEDINGS_RE = re.compile(
    r"\b(proceedings|proceeding|proc\.?)\s+(of\s+)?(the\s+)?", re.IGNORECASE
)
_VOLUME_RE = re.compile(
    r"\b(vol\.?|volume|no\.?|number|issue|pt\.?|part|pp\.?|pages?)\s*\d+[\w\-]*",
    re.IGNORECASE,
)
_PAREN_ACRONYM_RE = re.compile(r"\(\s*[A-Z][A-Za-z0-9&\-'’./ ]{0,30}\s*\)")

_INSTITUTION_CUES = frozenset(
    """university universitat universite universidad universita college institute
    institut instituto institution school academy laboratory laboratories lab labs
    hospital clinic center centre dept department faculty division research
    polytechnic observatory foundation agency council""".split()
)


@dataclass
class VenueRecord:
    """A canonical publication venue and its known variant titles."""

    venue_id: str
    canonical_name: str
    variants: set[str] = field(default_factory=set)
    issn: str | None = None


@dataclass
class InstitutionRecord:
    """One research-organization registry row."""

    inst_id: str
    name: str
    aliases: set[str] = field(default_factory=set)
    country: str = ""
    city: str = ""


@dataclass
class ParsedAffiliation:
    """Affiliation string split into main institute, child, and address."""

    main: str
    child: str = ""
    address: str = ""


def load_abbrev_table(path: str | Path | None = None) -> dict[str, str]:
    """Load the word->abbreviation TSV; defaults to the bundled subset."""
    if path is None:
        data = resources.files("stag.data").joinpath("ltwa_subset.tsv").read_text(encoding="utf-8")
    else:
        data = Path(path).read_text(encoding="utf-8")
    table: dict[str, str] = {}
    for line in data.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            table[parts[0].strip().lower()] = parts[1].strip()
    return table


def iso4_abbreviate(title: str, abbrev_table: dict[str, str] | None = None) -> str:
    """Abbreviate a serial title: drop filler words, abbreviate by longest prefix.

    Single-word titles come back unabbreviated, per the serials convention.
    """
    if abbrev_table is None:
        abbrev_table = load_abbrev_table()
    words = title.split()
    if len(words) <= 1:
        return title
    kept = [w for w in words if w.lower().strip(".,;:") not in _ISO4_DROP]
    if len(kept) == 1:
        return kept[0]
    out = []
    for word in kept:
        key = word.lower().strip(".,;:")
        abbrev = abbrev_table.get(key)
        if abbrev is None:
            # Longest table key that is a prefix of the word.
            best = ""
            for table_key in abbrev_table:
                if len(table_key) > len(best) and len(table_key) < len(key) and key.startswith(table_key):
                    best = table_key
            if best:
                abbrev = abbrev_table[best]
        out.append(abbrev if abbrev is not None else word)
    return " ".join(out)


def clean_venue_string(raw: str) -> str:
    """Regex cleanup of a raw venue string, then text normalization.

    Strips years, ordinals, "Proceedings of the", volume/issue/page
    fragments and parenthesized acronym duplicates.
    """
    s = raw or ""
    s = _PAREN_ACRONYM_RE.sub(" ", s)
    s = _PROCEEDINGS_RE.sub(" ", s)
    s = _ORDINAL_RE.sub(" ", s)
    s = _VOLUME_RE.sub(" ", s)
    s = _YEAR_RE.sub(" ", s)
    return normalize_text(s)


AMBIGUOUS = object()


@dataclass
class VenueKB:
    """Exact-match venue lookup table; ambiguous keys resolve to nothing."""

    keys: dict[str, object] = field(default_factory=dict)
    records: dict[str, VenueRecord] = field(default_factory=dict)

    def add_key(self, key: str, venue_id: str) -> None:
        if not key:
            return
        existing = self.keys.get(key)
        if existing is None:
            self.keys[key] = venue_id
        elif existing is not AMBIGUOUS and existing != venue_id:
            self.keys[key] = AMBIGUOUS

    def lookup(self, key: str) -> str | None:
        hit = self.keys.get(key)
        return hit if isinstance(hit, str) else None


def build_venue_kb(
    records: list[VenueRecord], abbrev_table: dict[str, str] | None = None
) -> VenueKB:
    """Index all variants and the abbreviated canonical form of each venue.

    Keys colliding across venues are marked ambiguous and never match.
    """
    if abbrev_table is None:
        abbrev_table = load_abbrev_table()
    kb = VenueKB()
    for record in records:
        kb.records[record.venue_id] = record
        for variant in sorted(record.variants | {record.canonical_name}):
            kb.add_key(normalize_text(variant), record.venue_id)
        iso4 = iso4_abbreviate(record.canonical_name, abbrev_table)
        kb.add_key(normalize_text(iso4), record.venue_id)
    return kb


def normalize_venue(raw: str, kb: VenueKB) -> str | None:
    """Exact lookup of the cleaned venue string; no fuzzy fallback."""
    key = clean_venue_string(raw)
    if not key:
        return None
    return kb.lookup(key)


def load_venue_records(path: str | Path) -> list[VenueRecord]:
    """Read venue KB records from JSONL: {id, name, variants, issn}."""
    records = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(f"{path}:{line_no}: bad venue record: {exc}") from exc
        records.append(
            VenueRecord(
                venue_id=str(obj["id"]),
                canonical_name=str(obj["name"]),
                variants=set(map(str, obj.get("variants") or [])),
                issn=obj.get("issn"),
            )
        )
    return records


def parse_affiliation(raw: str) -> ParsedAffiliation:
    """Split an affiliation string into main institute, child, and address.

    Comma/semicolon segments containing an institution cue word become
    institute candidates; the last such segment is the main institute,
    earlier ones the child, and everything after the main is the address.
    Raises RecordError on empty input.
    """
    if not raw or not raw.strip():
        raise RecordError("empty affiliation string")
    segments = [s.strip() for s in re.split(r"[;,]", raw) if s.strip()]
    if not segments:
        raise RecordError("empty affiliation string")
    cue_positions = [
        i
        for i, seg in enumerate(segments)
        if any(tok in _INSTITUTION_CUES for tok in normalize_text(seg).split())
    ]
    if not cue_positions:
        return ParsedAffiliation(main=raw.strip())
    main_pos = cue_positions[-1]
    child = ", ".join(segments[i] for i in cue_positions[:-1])
    address = ", ".join(segments[main_pos + 1 :])
    return ParsedAffiliation(main=segments[main_pos], child=child, address=address)


@dataclass
class InstitutionIndex:
    """Token inverted index over registry names and aliases."""

    records: list[InstitutionRecord]
    token_sets: list[frozenset[str]]
    postings: dict[str, list[int]]
    by_id: dict[str, InstitutionRecord]


def build_institution_index(registry: list[InstitutionRecord]) -> InstitutionIndex:
    ordered = sorted(registry, key=lambda r: r.inst_id)
    token_sets = []
    postings: dict[str, list[int]] = {}
    for i, record in enumerate(ordered):
        toks = set(normalize_text(record.name).split())
        for alias in record.aliases:
            toks.update(normalize_text(alias).split())
        toks.discard("")
        token_sets.append(frozenset(toks))
        for tok in toks:
            postings.setdefault(tok, []).append(i)
    return InstitutionIndex(
        records=ordered,
        token_sets=token_sets,
        postings=postings,
        by_id={r.inst_id: r for r in ordered},
    )


def retrieve_top_candidates(
    main: str, index: InstitutionIndex, top_k: int = RETRIEVAL_TOP_K
) -> list[tuple[str, float]]:
    """Top candidates by token-set Jaccard; ties break by institution id."""
    query = frozenset(normalize_text(main).split()) - {""}
    if not query:
        return []
    seen: set[int] = set()
    scored: list[tuple[float, str, int]] = []
    for tok in query:
        for i in index.postings.get(tok, ()):
            if i in seen:
                continue
            seen.add(i)
            score = jaccard(query, index.token_sets[i])
            scored.append((-score, index.records[i].inst_id, i))
    scored.sort()
    return [(index.records[i].inst_id, -neg) for neg, _, i in scored[:top_k]]


def link_affiliation(
    raw: str,
    index: InstitutionIndex,
    threshold: float = AFFILIATION_ACCEPT_THRESHOLD,
    top_k: int = RETRIEVAL_TOP_K,
) -> tuple[str, float] | None:
    """Parse, retrieve, rank; returns (inst_id, score) or None below threshold."""
    try:
        parsed = parse_affiliation(raw)
    except RecordError:
        return None
    candidates = retrieve_top_candidates(parsed.main, index, top_k)
    if not candidates:
        return None
    main_norm = normalize_text(parsed.main)
    addr_tokens = frozenset(normalize_text(parsed.address).split()) - {""}
    best: tuple[float, str] | None = None
    for inst_id, jac in candidates:
        record = index.by_id[inst_id]
        name_ratio = edit_ratio(main_norm, normalize_text(record.name))
        loc_tokens = frozenset(normalize_text(record.country + " " + record.city).split()) - {""}
        loc_score = jaccard(addr_tokens, loc_tokens) if addr_tokens and loc_tokens else 0.0
        score = 0.5 * jac + 0.3 * name_ratio + 0.2 * loc_score
        if best is None or score > best[0] or (score == best[0] and inst_id < best[1]):
            best = (score, inst_id)
    if best is not None and best[0] >= threshold:
        return best[1], best[0]
    return None


def load_institution_records(path: str | Path) -> list[InstitutionRecord]:
    """Read registry records from JSONL: {id, name, aliases, country, city}."""
    records = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(f"{path}:{line_no}: bad institution record: {exc}") from exc
        records.append(
            InstitutionRecord(
                inst_id=str(obj["id"]),
                name=str(obj["name"]),
                aliases=set(map(str, obj.get("aliases") or [])),
                country=str(obj.get("country") or ""),
                city=str(obj.get("city") or ""),
            )
        )
    return records
