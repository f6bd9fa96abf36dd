"""JSONL serialization of pipeline intermediates.

Each pipeline stage can dump its output for inspection or piecewise CLI
use; these records are an internal interchange format, distinct from the
published snapshot datasets.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .authors import Author
from .citelink import CitationEdge
from .dedup import Paper
from .ingest import AuthorMention


def paper_to_record(paper: Paper) -> dict:
    return {
        "corpusId": paper.corpus_id,
        "memberMentions": list(paper.member_mentions),
        "title": paper.title,
        "abstract": paper.abstract,
        "venueRaw": paper.venue_raw,
        "venueId": paper.venue_id,
        "pubDate": paper.pub_date,
        "datePrecision": paper.date_precision,
        "authors": [
            {"name": a.raw_name, "affiliation": a.affiliation_raw, "email": a.email}
            for a in paper.authors
        ],
        "externalIds": dict(paper.external_ids),
        "fieldsOfStudy": sorted(paper.fields_of_study),
        "embedding": [float(x) for x in paper.embedding] if paper.embedding is not None else None,
    }


def paper_from_record(obj: dict) -> Paper:
    emb = obj.get("embedding")
    return Paper(
        corpus_id=int(obj["corpusId"]),
        member_mentions=list(obj["memberMentions"]),
        title=obj.get("title", ""),
        abstract=obj.get("abstract", ""),
        venue_raw=obj.get("venueRaw", ""),
        venue_id=obj.get("venueId"),
        pub_date=obj.get("pubDate", ""),
        date_precision=obj.get("datePrecision", ""),
        authors=[
            AuthorMention(
                raw_name=a["name"],
                position=i,
                affiliation_raw=a.get("affiliation", ""),
                email=a.get("email"),
            )
            for i, a in enumerate(obj.get("authors", []))
        ],
        external_ids=dict(obj.get("externalIds", {})),
        fields_of_study=list(obj.get("fieldsOfStudy", [])),
        embedding=np.asarray(emb, dtype=np.float64) if emb is not None else None,
    )


def edge_to_record(edge: CitationEdge) -> dict:
    return {
        "citing": edge.citing,
        "cited": edge.cited,
        "contexts": list(edge.contexts),
        "contextCiteCounts": list(edge.context_cite_counts),
        "intent": edge.intent,
        "isInfluential": edge.is_influential,
    }


def edge_from_record(obj: dict) -> CitationEdge:
    return CitationEdge(
        citing=int(obj["citing"]),
        cited=int(obj["cited"]),
        contexts=list(obj.get("contexts", [])),
        context_cite_counts=list(obj.get("contextCiteCounts", [])),
        intent=obj.get("intent", "unspecified"),
        is_influential=bool(obj.get("isInfluential", False)),
    )


def author_to_record(author: Author) -> dict:
    return {
        "authorId": author.author_id,
        "name": author.canonical_name,
        "mentions": [[cid, pos] for cid, pos in author.mention_refs],
        "affiliations": sorted(author.affiliation_inst_ids),
    }


def author_from_record(obj: dict) -> Author:
    return Author(
        author_id=int(obj["authorId"]),
        canonical_name=obj["name"],
        mention_refs=[(int(c), int(p)) for c, p in obj["mentions"]],
        affiliation_inst_ids=set(obj.get("affiliations", [])),
    )


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records one per line; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path, parse: Callable[[dict], object] | None = None) -> list:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(parse(obj) if parse else obj)
    return out
