"""Author disambiguation: block author mentions, score pairs, cluster.

Mentions sharing a last name + first initial form a block; a logistic
pairwise scorer (trained on a committed labeled fixture set) drives
average-linkage agglomerative clustering, with name incompatibility as a
hard cannot-link veto. Clusters become Author nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .dedup import Paper
from .errors import TrainingError
from .ingest import AuthorMention
from .linear import fit_logistic
from .text import (
    edit_ratio,
    embed_document,
    jaccard,
    name_compatibility,
    normalize_text,
    parse_name,
)

DEFAULT_THRESHOLD = 0.75

FEATURE_NAMES = [
    "full_name_edit_ratio",
    "middle_name_compat",
    "coauthor_jaccard",
    "venue_match",
    "inst_match",
    "affiliation_jaccard",
    "year_gap_0_2",
    "year_gap_3_9",
    "year_gap_10plus",
    "year_gap_unknown",
    "embedding_cosine",
    "email_match",
]


@dataclass
class Author:
    """A disambiguated author node."""

    author_id: int
    canonical_name: str
    mention_refs: list[tuple[int, int]]
    affiliation_inst_ids: set[str] = field(default_factory=set)


@dataclass
class MentionInPaper:
    """One author mention with the paper context used by pairwise features."""

    corpus_id: int
    position: int
    raw_name: str
    coauthor_last_names: frozenset[str] = frozenset()
    venue_id: str | None = None
    inst_id: str | None = None
    affiliation_raw: str = ""
    year: int | None = None
    embedding: np.ndarray | None = None
    email: str | None = None


def author_block_key(mention: AuthorMention | MentionInPaper | str) -> str:
    """Blocking key: normalized last name + first initial; mononyms as-is."""
    raw = mention if isinstance(mention, str) else mention.raw_name
    parsed = parse_name(raw)
    if not parsed.last:
        return ""
    if not parsed.first:
        return parsed.last
    return f"{parsed.last} {parsed.first[0]}"


def author_pair_features(a: MentionInPaper, b: MentionInPaper) -> np.ndarray:
    """Fixed-order symmetric similarity features for two author mentions."""
    f = np.zeros(len(FEATURE_NAMES), dtype=np.float64)
    na = normalize_text(a.raw_name)
    nb = normalize_text(b.raw_name)
    f[0] = edit_ratio(na, nb)
    pa, pb = parse_name(a.raw_name), parse_name(b.raw_name)
    if pa.middle and pb.middle:
        ia = [m[0] for m in pa.middle]
        ib = [m[0] for m in pb.middle]
        shorter, longer = (ia, ib) if len(ia) <= len(ib) else (ib, ia)
        f[1] = 1.0 if longer[: len(shorter)] == shorter else -1.0
    f[2] = jaccard(a.coauthor_last_names, b.coauthor_last_names) if (
        a.coauthor_last_names or b.coauthor_last_names
    ) else 0.0
    if a.venue_id is not None and b.venue_id is not None and a.venue_id == b.venue_id:
        f[3] = 1.0
    if a.inst_id is not None and b.inst_id is not None and a.inst_id == b.inst_id:
        f[4] = 1.0
    ta = frozenset(normalize_text(a.affiliation_raw).split()) - {""}
    tb = frozenset(normalize_text(b.affiliation_raw).split()) - {""}
    if ta and tb:
        f[5] = jaccard(ta, tb)
    if a.year is None or b.year is None:
        f[9] = 1.0
    else:
        gap = abs(a.year - b.year)
        if gap <= 2:
            f[6] = 1.0
        elif gap <= 9:
            f[7] = 1.0
        else:
            f[8] = 1.0
    if a.embedding is not None and b.embedding is not None:
        norm_a = float(np.linalg.norm(a.embedding))
        norm_b = float(np.linalg.norm(b.embedding))
        if norm_a > 0 and norm_b > 0:
            f[10] = float(np.dot(a.embedding, b.embedding) / (norm_a * norm_b))
    if a.email and b.email and a.email == b.email:
        f[11] = 1.0
    return f


@dataclass
class AuthorScorer:
    """Logistic pairwise scorer over author-mention features."""

    feature_names: list[str]
    weights: np.ndarray
    bias: float
    threshold: float = DEFAULT_THRESHOLD

    def score(self, features: np.ndarray) -> float:
        z = float(np.dot(self.weights, features) + self.bias)
        if z >= 0:
            return 1.0 / (1.0 + np.exp(-z))
        ez = np.exp(z)
        return ez / (1.0 + ez)

    def to_json(self) -> str:
        return json.dumps(
            {
                "features": self.feature_names,
                "weights": [float(w) for w in self.weights],
                "bias": self.bias,
                "threshold": self.threshold,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "AuthorScorer":
        obj = json.loads(text)
        return cls(
            feature_names=list(obj["features"]),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            threshold=float(obj.get("threshold", DEFAULT_THRESHOLD)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AuthorScorer":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _fixture_side(obj: dict, dim: int = 64) -> MentionInPaper:
    return MentionInPaper(
        corpus_id=0,
        position=0,
        raw_name=str(obj["name"]),
        coauthor_last_names=frozenset(
            parse_name(n).last for n in obj.get("coauthors", []) if parse_name(n).last
        ),
        venue_id=obj.get("venue_id"),
        inst_id=obj.get("inst_id"),
        affiliation_raw=str(obj.get("affiliation") or ""),
        year=obj.get("year"),
        embedding=embed_document(str(obj.get("title") or ""), str(obj.get("abstract") or ""), dim),
        email=obj.get("email"),
    )


def fit_author_scorer(
    labeled_pairs: list[tuple[MentionInPaper, MentionInPaper, int]],
    threshold: float = DEFAULT_THRESHOLD,
    iterations: int = 1200,
    learning_rate: float = 1.0,
) -> AuthorScorer:
    """Fit the logistic author-pair scorer on labeled mention pairs."""
    if not labeled_pairs:
        raise TrainingError("empty author-pair training set")
    x = np.stack([author_pair_features(a, b) for a, b, _ in labeled_pairs])
    y = np.asarray([label for _, _, label in labeled_pairs], dtype=np.float64)
    if y.min() == y.max():
        raise TrainingError("author-pair training set needs both labels")
    try:
        model = fit_logistic(x, y, iterations=iterations, learning_rate=learning_rate)
    except ValueError as exc:
        raise TrainingError(str(exc)) from exc
    return AuthorScorer(
        feature_names=list(FEATURE_NAMES),
        weights=model.weights,
        bias=model.bias,
        threshold=threshold,
    )


@lru_cache(maxsize=1)
def default_scorer() -> AuthorScorer:
    """Scorer fitted from the committed labeled fixture set."""
    data = resources.files("stag.data").joinpath("author_pairs.jsonl").read_text(encoding="utf-8")
    pairs = []
    for line in data.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        pairs.append((_fixture_side(obj["a"]), _fixture_side(obj["b"]), int(obj["label"])))
    return fit_author_scorer(pairs)


def _pair_score_matrix(
    mentions: list[MentionInPaper], scorer: AuthorScorer
) -> tuple[list[list[float]], list[list[bool]]]:
    n = len(mentions)
    scores = [[0.0] * n for _ in range(n)]
    compat = [[True] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            s = scorer.score(author_pair_features(mentions[i], mentions[j]))
            scores[i][j] = scores[j][i] = s
            ok = name_compatibility(mentions[i].raw_name, mentions[j].raw_name)
            compat[i][j] = compat[j][i] = ok
    return scores, compat


def cluster_author_block(
    mentions: list[MentionInPaper],
    scorer: AuthorScorer | None = None,
    threshold: float | None = None,
) -> list[list[int]]:
    """Average-linkage agglomerative clustering of one block.

    Returns a partition as lists of indices into ``mentions``. Linkage is
    the exact mean (math.fsum) of cross-cluster pair scores; merges stop
    when the best linkage drops below the threshold. A merge is vetoed when
    ANY cross pair is name-incompatible. Ties break toward the pair of
    clusters with the smallest minimum member indices.
    """
    if scorer is None:
        scorer = default_scorer()
    if threshold is None:
        threshold = scorer.threshold
    n = len(mentions)
    if n == 0:
        return []
    if n == 1:
        return [[0]]
    scores, compat = _pair_score_matrix(mentions, scorer)
    clusters: list[list[int]] = [[i] for i in range(n)]

    def linkage(a: list[int], b: list[int]) -> float:
        return math.fsum(scores[i][j] for i in a for j in b) / (len(a) * len(b))

    def vetoed(a: list[int], b: list[int]) -> bool:
        return any(not compat[i][j] for i in a for j in b)

    while len(clusters) > 1:
        best_key: tuple[float, int, int] | None = None
        best_pair: tuple[int, int] | None = None
        for ai in range(len(clusters)):
            for bi in range(ai + 1, len(clusters)):
                if vetoed(clusters[ai], clusters[bi]):
                    continue
                link = linkage(clusters[ai], clusters[bi])
                ma, mb = min(clusters[ai]), min(clusters[bi])
                if ma > mb:
                    ma, mb = mb, ma
                key = (-link, ma, mb)
                if best_key is None or key < best_key:
                    best_key = key
                    best_pair = (ai, bi)
        if best_key is None or -best_key[0] < threshold:
            break
        ai, bi = best_pair
        merged = sorted(clusters[ai] + clusters[bi])
        clusters = [c for k, c in enumerate(clusters) if k not in (ai, bi)]
        clusters.append(merged)
    return sorted(clusters, key=lambda c: c[0])


def mentions_from_papers(
    papers: list[Paper],
    inst_links: dict[tuple[int, int], str] | None = None,
) -> list[MentionInPaper]:
    """Flatten paper author lists into mention contexts for clustering."""
    out: list[MentionInPaper] = []
    for paper in sorted(papers, key=lambda p: p.corpus_id):
        last_names = [parse_name(a.raw_name).last for a in paper.authors]
        for author in paper.authors:
            coauthors = frozenset(
                ln for k, ln in enumerate(last_names) if k != author.position and ln
            )
            key = (paper.corpus_id, author.position)
            out.append(
                MentionInPaper(
                    corpus_id=paper.corpus_id,
                    position=author.position,
                    raw_name=author.raw_name,
                    coauthor_last_names=coauthors,
                    venue_id=paper.venue_id,
                    inst_id=inst_links.get(key) if inst_links else None,
                    affiliation_raw=author.affiliation_raw,
                    year=paper.year,
                    embedding=paper.embedding,
                    email=author.email,
                )
            )
    return out


@dataclass
class DisambiguationResult:
    authors: list[Author]
    assignment: dict[tuple[int, int], int]


def disambiguate_authors(
    papers: list[Paper],
    scorer: AuthorScorer | None = None,
    threshold: float | None = None,
    inst_links: dict[tuple[int, int], str] | None = None,
) -> DisambiguationResult:
    """Block, score, and cluster all author mentions of all papers.

    Author IDs are assigned 1..n ordered by each cluster's smallest
    (corpus_id, position); the canonical name is the longest member
    variant. Affiliations are the union of linked institution ids when
    ``inst_links`` is provided (the pipeline fills them in afterwards
    otherwise).
    """
    if scorer is None:
        scorer = default_scorer()
    mentions = mentions_from_papers(papers, inst_links)
    blocks: dict[str, list[MentionInPaper]] = {}
    for m in mentions:
        blocks.setdefault(author_block_key(m), []).append(m)

    clusters: list[list[MentionInPaper]] = []
    for key in sorted(blocks):
        block = sorted(blocks[key], key=lambda m: (m.corpus_id, m.position))
        for group in cluster_author_block(block, scorer, threshold):
            clusters.append([block[i] for i in group])
    clusters.sort(key=lambda c: min((m.corpus_id, m.position) for m in c))

    authors: list[Author] = []
    assignment: dict[tuple[int, int], int] = {}
    for author_id, members in enumerate(clusters, start=1):
        name = max((m.raw_name for m in members), key=lambda s: (len(s), s))
        refs = sorted((m.corpus_id, m.position) for m in members)
        inst_ids = {m.inst_id for m in members if m.inst_id}
        authors.append(
            Author(
                author_id=author_id,
                canonical_name=name,
                mention_refs=refs,
                affiliation_inst_ids=inst_ids,
            )
        )
        for ref in refs:
            assignment[ref] = author_id
    return DisambiguationResult(authors=authors, assignment=assignment)
