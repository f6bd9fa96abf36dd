"""Citation linking: match bibliography entries to canonical papers.

A lightweight title index (exact normalized titles plus a token inverted
index) retrieves candidates; a weighted title/author/year score accepts or
rejects the best one. Accepted links become citation edges carrying the
body sentences that cite them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .dedup import Paper
from .ingest import BibEntry, PaperMention
from .text import edit_ratio, jaccard, normalize_text, parse_name

ACCEPT_THRESHOLD = 0.7
RAW_FALLBACK_THRESHOLD = 0.8
MAX_TOKEN_CANDIDATES = 20

TITLE_WEIGHT = 0.6
AUTHOR_WEIGHT = 0.25
YEAR_WEIGHT = 0.15


@dataclass
class CitationEdge:
    """A citing->cited link with its context sentences."""

    citing: int
    cited: int
    contexts: list[str] = field(default_factory=list)
    # How many bibliography entries each context's sentence cites; parallel
    # to ``contexts`` and needed by the influential-citation heuristic.
    context_cite_counts: list[int] = field(default_factory=list)
    intent: str = "unspecified"
    is_influential: bool = False


@dataclass
class PaperIndex:
    """Immutable lookup structures over deduplicated papers."""

    exact_title: dict[str, list[int]]
    token_postings: dict[str, list[int]]
    by_corpus_id: dict[int, Paper]
    first_author_last: dict[int, str]
    raw_match_text: dict[int, str]


def build_paper_index(papers: list[Paper]) -> PaperIndex:
    """Index every paper under its normalized title and all title tokens."""
    exact_title: dict[str, list[int]] = {}
    token_postings: dict[str, list[int]] = {}
    by_corpus_id: dict[int, Paper] = {}
    first_author_last: dict[int, str] = {}
    raw_match_text: dict[int, str] = {}
    for paper in sorted(papers, key=lambda p: p.corpus_id):
        cid = paper.corpus_id
        by_corpus_id[cid] = paper
        norm = normalize_text(paper.title)
        exact_title.setdefault(norm, []).append(cid)
        for token in set(norm.split()):
            token_postings.setdefault(token, []).append(cid)
        if paper.authors:
            first_author_last[cid] = parse_name(paper.authors[0].raw_name).last
        else:
            first_author_last[cid] = ""
        author_part = " ".join(a.raw_name for a in paper.authors)
        year_part = str(paper.year) if paper.year else ""
        raw_match_text[cid] = normalize_text(f"{paper.title} {author_part} {year_part}")
    return PaperIndex(
        exact_title=exact_title,
        token_postings=token_postings,
        by_corpus_id=by_corpus_id,
        first_author_last=first_author_last,
        raw_match_text=raw_match_text,
    )


def _candidate_ids(entry_title_norm: str, index: PaperIndex) -> list[int]:
    candidates: set[int] = set()
    exact = index.exact_title.get(entry_title_norm)
    if exact:
        candidates.update(exact)
    counts: Counter = Counter()
    for token in set(entry_title_norm.split()):
        for cid in index.token_postings.get(token, ()):
            counts[cid] += 1
    # Top candidates by shared-token count; ties toward smaller corpus id.
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:MAX_TOKEN_CANDIDATES]
    candidates.update(cid for cid, _ in top)
    return sorted(candidates)


def _entry_last_names(entry: BibEntry) -> frozenset[str]:
    names = []
    for raw in entry.author_names:
        last = parse_name(raw).last
        if last:
            names.append(last)
    return frozenset(names)


def score_entry_against(entry: BibEntry, paper: Paper, index: PaperIndex) -> float:
    """Weighted title/author/year similarity between a bib entry and a paper."""
    entry_norm = normalize_text(entry.title)
    paper_norm = normalize_text(paper.title)
    title_score = edit_ratio(entry_norm, paper_norm) if (entry_norm or paper_norm) else 0.0

    entry_lasts = _entry_last_names(entry)
    if entry_lasts:
        paper_lasts = frozenset(
            parse_name(a.raw_name).last for a in paper.authors if parse_name(a.raw_name).last
        )
        author_score = jaccard(entry_lasts, paper_lasts) if paper_lasts else 0.0
    elif title_score == 1.0:
        # An exact title with no parsed authors should not be penalized.
        author_score = 1.0
    else:
        author_score = 0.0

    paper_year = paper.year
    if entry.year is not None and paper_year is not None:
        gap = abs(entry.year - paper_year)
        year_score = 1.0 if gap == 0 else (0.5 if gap == 1 else 0.0)
    else:
        year_score = 0.0

    return TITLE_WEIGHT * title_score + AUTHOR_WEIGHT * author_score + YEAR_WEIGHT * year_score


def link_bib_entry(
    entry: BibEntry,
    index: PaperIndex,
    threshold: float = ACCEPT_THRESHOLD,
) -> tuple[int, float] | None:
    """Resolve one bibliography entry to (corpus_id, score), or None.

    Entries without a parsed title fall back to matching the raw string
    against each candidate's title+authors+year text. Ties break toward the
    smaller corpus id.
    """
    entry_title_norm = normalize_text(entry.title)
    if entry_title_norm:
        best: tuple[float, int] | None = None
        for cid in _candidate_ids(entry_title_norm, index):
            score = score_entry_against(entry, index.by_corpus_id[cid], index)
            if best is None or score > best[0] or (score == best[0] and cid < best[1]):
                best = (score, cid)
        if best is not None and best[0] >= threshold:
            return best[1], best[0]
        return None

    raw_norm = normalize_text(entry.raw)
    if not raw_norm:
        return None
    best = None
    for cid in _candidate_ids(raw_norm, index):
        score = edit_ratio(raw_norm, index.raw_match_text[cid])
        if best is None or score > best[0] or (score == best[0] and cid < best[1]):
            best = (score, cid)
    if best is not None and best[0] >= RAW_FALLBACK_THRESHOLD:
        return best[1], best[0]
    return None


def build_citation_graph(
    papers: list[Paper],
    mentions: list[PaperMention],
    mention_to_corpus_id: dict[str, int],
    index: PaperIndex | None = None,
    threshold: float = ACCEPT_THRESHOLD,
) -> list[CitationEdge]:
    """Link every member mention's bibliography and collect context sentences.

    Duplicate (citing, cited) pairs merge their contexts; self-citations to
    the same canonical paper are dropped. Edges come back sorted by
    (citing, cited).
    """
    if index is None:
        index = build_paper_index(papers)
    edges: dict[tuple[int, int], CitationEdge] = {}
    for mention in mentions:
        citing = mention_to_corpus_id.get(mention.mention_id)
        if citing is None or not mention.bibliography:
            continue
        resolved: dict[int, int] = {}
        for bib_idx, entry in enumerate(mention.bibliography):
            hit = link_bib_entry(entry, index, threshold)
            if hit is None:
                continue
            cited = hit[0]
            if cited == citing:
                continue
            resolved[bib_idx] = cited
        if not resolved:
            continue
        contexts_by_target: dict[int, list[tuple[str, int]]] = {}
        for sentence, cites in mention.body_sentences:
            cited_targets = {resolved[i] for i in cites if i in resolved}
            # Distinct papers cited by the sentence; unresolved entries still
            # count as other papers for the solo-citation test downstream.
            unresolved = sum(1 for i in cites if i not in resolved)
            sentence_papers = len(cited_targets) + unresolved
            for target in cited_targets:
                contexts_by_target.setdefault(target, []).append((sentence, sentence_papers))
        for cited in sorted(set(resolved.values())):
            key = (citing, cited)
            edge = edges.get(key)
            if edge is None:
                edge = CitationEdge(citing=citing, cited=cited)
                edges[key] = edge
            for sentence, n_cites in contexts_by_target.get(cited, ()):
                if sentence not in edge.contexts:
                    edge.contexts.append(sentence)
                    edge.context_cite_counts.append(n_cites)
    return [edges[key] for key in sorted(edges)]
