"""Recent-paper recommendations and peer-review matching.

Recommendations train two per-request linear rankers (TF-IDF and embedding
based) from the caller's positive/negative papers plus weighted random
negatives, preselect candidates near the positive centroid within a 60-day
recency window, and rank by the mean of both margins. Peer review exposes
a binary co-authorship conflict flag and an embedding-distance match score.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import BadRequestError, NotFoundError, NotScorableError
from .graphstore import Graph
from .linear import LinearModel, fit_hinge
from .text import embed_document
from .vectorize import CharTfidfVectorizer

RECENT_WINDOW_DAYS = 60
CANDIDATE_POOL_SIZE = 500
RANDOM_NEGATIVE_WEIGHT = 0.1
MAX_RESULTS = 100
MATCH_TOP_PAPERS = 3


def _parse_date(value: str | date) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(value)
    except ValueError as exc:
        raise BadRequestError(f"bad date {value!r}: {exc}") from exc


@dataclass
class RecentIndex:
    """Papers published within the recency window, with their embeddings."""

    now: date
    corpus_ids: list[int]
    matrix: np.ndarray


@dataclass
class UserModelPair:
    """Per-request rankers over TF-IDF and embedding spaces."""

    vectorizer: CharTfidfVectorizer
    tfidf_model: LinearModel
    embed_model: LinearModel
    n_positives: int
    n_negatives: int
    n_random_negatives: int


def build_recent_index(graph: Graph, now: str | date) -> RecentIndex:
    """Index exactly the papers with now-60d <= pub_date <= now."""
    now_date = _parse_date(now)
    cutoff = now_date - timedelta(days=RECENT_WINDOW_DAYS)
    ids = []
    rows = []
    dim = graph.embedding_dim or 0
    for cid in sorted(graph.papers):
        paper = graph.papers[cid]
        if not paper.pub_date or paper.embedding is None:
            continue
        try:
            pub = date.fromisoformat(paper.pub_date)
        except ValueError:
            continue
        if cutoff <= pub <= now_date:
            ids.append(cid)
            rows.append(paper.embedding)
            dim = len(paper.embedding)
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return RecentIndex(now=now_date, corpus_ids=ids, matrix=matrix)


def _validate_annotations(
    positives: list[int], negatives: list[int], graph: Graph
) -> tuple[list[int], list[int]]:
    if not positives:
        raise BadRequestError("at least one positive paper id is required")
    pos = list(dict.fromkeys(positives))
    neg = list(dict.fromkeys(negatives))
    overlap = set(pos) & set(neg)
    if overlap:
        raise BadRequestError(f"ids in both positives and negatives: {sorted(overlap)}")
    for cid in pos + neg:
        if cid not in graph.papers:
            raise BadRequestError(f"unknown corpus id {cid}")
    return pos, neg


def _paper_text(graph: Graph, cid: int) -> str:
    paper = graph.papers[cid]
    return f"{paper.title} {paper.abstract}"


def train_user_models(
    positives: list[int],
    negatives: list[int],
    graph: Graph,
    seed: int = 0,
) -> UserModelPair:
    """Fit the TF-IDF and embedding rankers for one annotation set.

    Random negatives are drawn (seeded) from the rest of the graph with
    weight 0.1 against 1.0 for user annotations.
    """
    pos, neg = _validate_annotations(positives, negatives, graph)
    annotated = set(pos) | set(neg)
    pool = [cid for cid in sorted(graph.papers) if cid not in annotated]
    want = max(20, 5 * len(pos))
    rng = random.Random(seed)
    rand_neg = sorted(rng.sample(pool, min(want, len(pool))))

    sample_ids = pos + neg + rand_neg
    labels = np.asarray([1.0] * len(pos) + [-1.0] * (len(neg) + len(rand_neg)))
    weights = np.asarray([1.0] * (len(pos) + len(neg)) + [RANDOM_NEGATIVE_WEIGHT] * len(rand_neg))

    texts = [_paper_text(graph, cid) for cid in sample_ids]
    vectorizer = CharTfidfVectorizer().fit(texts)
    x_tfidf = vectorizer.transform(texts)
    tfidf_model = fit_hinge(x_tfidf, labels, sample_weight=weights)

    dim = graph.embedding_dim or 0
    rows = []
    for cid in sample_ids:
        emb = graph.papers[cid].embedding
        if emb is None:
            emb = np.zeros(dim)
        rows.append(emb)
    x_embed = np.vstack(rows)
    embed_model = fit_hinge(x_embed, labels, sample_weight=weights)

    return UserModelPair(
        vectorizer=vectorizer,
        tfidf_model=tfidf_model,
        embed_model=embed_model,
        n_positives=len(pos),
        n_negatives=len(neg),
        n_random_negatives=len(rand_neg),
    )


def recommend(
    positives: list[int],
    negatives: list[int],
    graph: Graph,
    now: str | date,
    k: int = 10,
    seed: int = 0,
    index: RecentIndex | None = None,
) -> list[tuple[int, float]]:
    """Top-k recent papers ranked by the mean of the two model margins.

    Candidates are the 500 eligible papers nearest the positive centroid;
    seed papers never appear in the output. An empty recency window yields
    an empty result.
    """
    if k < 1 or k > MAX_RESULTS:
        raise BadRequestError(f"k must be in [1, {MAX_RESULTS}]")
    pos, neg = _validate_annotations(positives, negatives, graph)
    if index is None:
        index = build_recent_index(graph, now)
    excluded = set(pos) | set(neg)
    eligible = [
        (i, cid) for i, cid in enumerate(index.corpus_ids) if cid not in excluded
    ]
    if not eligible:
        return []

    pos_rows = []
    for cid in pos:
        emb = graph.papers[cid].embedding
        if emb is not None:
            pos_rows.append(emb)
    if pos_rows:
        centroid = np.mean(np.vstack(pos_rows), axis=0)
        norm = float(np.linalg.norm(centroid))
        if norm > 0:
            centroid = centroid / norm
    else:
        centroid = np.zeros(index.matrix.shape[1])

    sims = []
    for i, cid in eligible:
        row = index.matrix[i]
        denom = float(np.linalg.norm(row)) * float(np.linalg.norm(centroid))
        sim = float(np.dot(row, centroid) / denom) if denom > 0 else 0.0
        sims.append((-sim, cid))
    sims.sort()
    candidates = [cid for _, cid in sims[:CANDIDATE_POOL_SIZE]]

    models = train_user_models(pos, neg, graph, seed=seed)
    texts = [_paper_text(graph, cid) for cid in candidates]
    tfidf_margins = models.tfidf_model.margins(models.vectorizer.transform(texts))
    dim = index.matrix.shape[1]
    embed_rows = np.vstack(
        [
            graph.papers[cid].embedding
            if graph.papers[cid].embedding is not None
            else np.zeros(dim)
            for cid in candidates
        ]
    )
    embed_margins = models.embed_model.margins(embed_rows)

    scored = [
        (float((tfidf_margins[i] + embed_margins[i]) / 2.0), cid)
        for i, cid in enumerate(candidates)
    ]
    scored.sort(key=lambda sc: (-sc[0], sc[1]))
    return [(cid, score) for score, cid in scored[:k]]


def coi_score(reviewer: int, submission_authors: list[int], graph: Graph) -> int:
    """1 iff the reviewer shares any paper with any submission author."""
    if reviewer not in graph.authors:
        raise NotFoundError(f"unknown author id {reviewer}")
    targets = set(submission_authors)
    if not targets:
        return 0
    for cid in graph.author_papers.get(reviewer, ()):
        if graph.paper_author_ids[cid] & targets:
            return 1
    return 0


def match_score(reviewer: int, submission: dict, graph: Graph) -> float:
    """Mean cosine distance to the reviewer's three most similar papers.

    Lower is a better match. Raises NotScorableError when the reviewer has
    no papers with embeddings.
    """
    if reviewer not in graph.authors:
        raise NotFoundError(f"unknown author id {reviewer}")
    dim = graph.embedding_dim or 256
    sub_vec = embed_document(
        str(submission.get("title") or ""), str(submission.get("abstract") or ""), dim
    )
    distances = []
    for cid in graph.author_papers.get(reviewer, ()):
        emb = graph.papers[cid].embedding
        if emb is None:
            continue
        denom = float(np.linalg.norm(sub_vec)) * float(np.linalg.norm(emb))
        cos = float(np.dot(sub_vec, emb) / denom) if denom > 0 else 0.0
        distances.append(1.0 - cos)
    if not distances:
        raise NotScorableError(f"reviewer {reviewer} has no scorable papers")
    distances.sort()
    top = distances[: min(MATCH_TOP_PAPERS, len(distances))]
    return float(sum(top) / len(top))
