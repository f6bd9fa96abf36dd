"""Paper deduplication: title blocking, pairwise scoring, within-block clustering.

Mentions are grouped into blocks by cheap title/ID keys, pairs within a
block are scored by a trained logistic model over string-similarity
features, and connected components of above-threshold pairs become
canonical papers. Training pairs come from cross-source DOI/PDF agreement,
so no hand labeling is needed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .ingest import AuthorMention, PaperMention
from .linear import fit_logistic, roc_auc
from .text import edit_ratio, jaccard, normalize_text, parse_name

DEFAULT_THRESHOLD = 0.8
MIN_TRAINING_POSITIVES = 50

FEATURE_NAMES = [
    "title_edit_ratio",
    "title_token_jaccard",
    "abstract_token_jaccard",
    "abstract_both_present",
    "author_last_name_jaccard",
    "first_author_edit_ratio",
    "venue_edit_ratio",
    "year_diff_0",
    "year_diff_1",
    "year_diff_2plus",
    "year_unknown",
    "id_doi",
    "id_arxiv",
    "id_pmid",
    "id_pmcid",
    "id_mag",
    "id_acl",
    "pdf_hash_match",
]

_ID_KINDS = ["DOI", "ARXIV", "PMID", "PMCID", "MAG", "ACL"]


def _load_stopwords() -> frozenset[str]:
    data = resources.files("stag.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in data.splitlines() if w.strip())


STOPWORDS = _load_stopwords()


@dataclass
class Paper:
    """Canonical deduplicated paper node."""

    corpus_id: int
    member_mentions: list[str]
    title: str = ""
    abstract: str = ""
    venue_raw: str = ""
    venue_id: str | None = None
    pub_date: str = ""
    date_precision: str = ""
    authors: list[AuthorMention] = field(default_factory=list)
    external_ids: dict[str, str] = field(default_factory=dict)
    fields_of_study: list[str] = field(default_factory=list)
    embedding: np.ndarray | None = None

    @property
    def year(self) -> int | None:
        if len(self.pub_date) >= 4 and self.pub_date[:4].isdigit():
            return int(self.pub_date[:4])
        return None


@dataclass
class PairScoreModel:
    """Logistic scorer over the fixed pairwise feature vector."""

    feature_names: list[str]
    weights: np.ndarray
    bias: float
    threshold: float = DEFAULT_THRESHOLD
    train_auc: float | None = None

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
                "train_auc": self.train_auc,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PairScoreModel":
        obj = json.loads(text)
        return cls(
            feature_names=list(obj["features"]),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            threshold=float(obj.get("threshold", DEFAULT_THRESHOLD)),
            train_auc=obj.get("train_auc"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PairScoreModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def block_key(mention: PaperMention) -> set[str]:
    """Blocking keys: leading non-stopword title tokens, title acronym, ID keys."""
    keys: set[str] = set()
    title_tokens = normalize_text(mention.title).split()
    if title_tokens:
        content = [t for t in title_tokens if t not in STOPWORDS]
        if content:
            keys.add(" ".join(content[:3]))
        acronym = "".join(t[0] for t in title_tokens)
        if acronym:
            keys.add(acronym)
    for kind, value in mention.external_ids.items():
        norm = value.lower() if kind == "DOI" else value
        keys.add(f"{kind.lower()}:{norm}")
    if mention.pdf_hash:
        keys.add(f"pdf:{mention.pdf_hash}")
    return keys


class _MentionContext:
    """Precomputed normalized fields so per-pair feature math stays cheap."""

    __slots__ = (
        "mention",
        "norm_title",
        "title_tokens",
        "abstract_tokens",
        "author_last_names",
        "first_author",
        "norm_venue",
        "year",
        "ids",
        "pdf_hash",
    )

    def __init__(self, mention: PaperMention):
        self.mention = mention
        self.norm_title = normalize_text(mention.title)
        self.title_tokens = frozenset(self.norm_title.split()) if self.norm_title else frozenset()
        self.abstract_tokens = (
            frozenset(normalize_text(mention.abstract).split()) if mention.abstract else frozenset()
        )
        last_names = []
        for author in mention.authors:
            parsed = parse_name(author.raw_name)
            if parsed.last:
                last_names.append(parsed.last)
        self.author_last_names = frozenset(last_names)
        self.first_author = (
            normalize_text(mention.authors[0].raw_name) if mention.authors else ""
        )
        self.norm_venue = normalize_text(mention.venue_raw)
        self.year = (
            int(mention.pub_date[:4])
            if len(mention.pub_date) >= 4 and mention.pub_date[:4].isdigit()
            else None
        )
        self.ids = {k: (v.lower() if k == "DOI" else v) for k, v in mention.external_ids.items()}
        self.pdf_hash = mention.pdf_hash


def _context_pair_features(a: _MentionContext, b: _MentionContext) -> np.ndarray:
    f = np.zeros(len(FEATURE_NAMES), dtype=np.float64)
    f[0] = edit_ratio(a.norm_title, b.norm_title)
    f[1] = jaccard(a.title_tokens, b.title_tokens)
    if a.abstract_tokens and b.abstract_tokens:
        f[2] = jaccard(a.abstract_tokens, b.abstract_tokens)
        f[3] = 1.0
    f[4] = jaccard(a.author_last_names, b.author_last_names)
    f[5] = edit_ratio(a.first_author, b.first_author) if (a.first_author or b.first_author) else 0.0
    f[6] = edit_ratio(a.norm_venue, b.norm_venue) if (a.norm_venue or b.norm_venue) else 0.0
    if a.year is None or b.year is None:
        f[10] = 1.0
    else:
        diff = abs(a.year - b.year)
        if diff == 0:
            f[7] = 1.0
        elif diff == 1:
            f[8] = 1.0
        else:
            f[9] = 1.0
    for i, kind in enumerate(_ID_KINDS):
        va = a.ids.get(kind)
        vb = b.ids.get(kind)
        if va is not None and vb is not None:
            f[11 + i] = 1.0 if va == vb else -1.0
    if a.pdf_hash and b.pdf_hash:
        f[17] = 1.0 if a.pdf_hash == b.pdf_hash else -1.0
    return f


def pair_features(a: PaperMention, b: PaperMention) -> np.ndarray:
    """Fixed-order symmetric similarity features for a mention pair."""
    return _context_pair_features(_MentionContext(a), _MentionContext(b))


def _doi_conflict(a: _MentionContext, b: _MentionContext) -> bool:
    da = a.ids.get("DOI")
    db = b.ids.get("DOI")
    return da is not None and db is not None and da != db


def _identifier_match(a: _MentionContext, b: _MentionContext) -> bool:
    da, db = a.ids.get("DOI"), b.ids.get("DOI")
    if da is not None and da == db:
        return True
    return a.pdf_hash is not None and a.pdf_hash == b.pdf_hash


def make_training_pairs(
    mentions: list[PaperMention],
    min_positives: int = MIN_TRAINING_POSITIVES,
    max_ratio: int = 3,
    seed: int = 0,
) -> tuple[list[tuple[PaperMention, PaperMention]], list[int]]:
    """Build labeled pairs from cross-source DOI/PDF agreement.

    Positives share a DOI or pdf hash across different sources; negatives
    share a block key, both carry identifiers, and none of them match. The
    majority class is down-sampled to at most ``max_ratio`` times the
    minority. Raises TrainingError below ``min_positives`` positives.
    """
    contexts = [_MentionContext(m) for m in mentions]

    positives: list[tuple[int, int]] = []
    seen_pos: set[tuple[int, int]] = set()
    by_identifier: dict[str, list[int]] = {}
    for i, ctx in enumerate(contexts):
        doi = ctx.ids.get("DOI")
        if doi:
            by_identifier.setdefault("doi:" + doi, []).append(i)
        if ctx.pdf_hash:
            by_identifier.setdefault("pdf:" + ctx.pdf_hash, []).append(i)
    for group in by_identifier.values():
        for ai in range(len(group)):
            for bi in range(ai + 1, len(group)):
                i, j = group[ai], group[bi]
                if contexts[i].mention.source == contexts[j].mention.source:
                    continue
                key = (min(i, j), max(i, j))
                if key not in seen_pos:
                    seen_pos.add(key)
                    positives.append(key)

    blocks: dict[str, list[int]] = {}
    for i, m in enumerate(mentions):
        for key in block_key(m):
            if key.startswith(("doi:", "pdf:", "arxiv:", "pmid:", "pmcid:", "mag:", "acl:")):
                continue
            blocks.setdefault(key, []).append(i)
    negatives: list[tuple[int, int]] = []
    seen_neg: set[tuple[int, int]] = set()
    for members in blocks.values():
        for ai in range(len(members)):
            for bi in range(ai + 1, len(members)):
                i, j = members[ai], members[bi]
                a, b = contexts[i], contexts[j]
                if not (a.ids.get("DOI") or a.pdf_hash) or not (b.ids.get("DOI") or b.pdf_hash):
                    continue
                if _identifier_match(a, b):
                    continue
                key = (min(i, j), max(i, j))
                if key in seen_pos or key in seen_neg:
                    continue
                seen_neg.add(key)
                negatives.append(key)

    if len(positives) < min_positives:
        raise TrainingError(
            f"only {len(positives)} positive training pairs; need >= {min_positives}"
        )
    if not negatives:
        raise TrainingError("no negative training pairs could be constructed")

    positives.sort()
    negatives.sort()
    rng = random.Random(seed)
    if len(positives) > max_ratio * len(negatives):
        positives = sorted(rng.sample(positives, max_ratio * len(negatives)))
    elif len(negatives) > max_ratio * len(positives):
        negatives = sorted(rng.sample(negatives, max_ratio * len(positives)))

    pairs = [(mentions[i], mentions[j]) for i, j in positives + negatives]
    labels = [1] * len(positives) + [0] * len(negatives)
    return pairs, labels


def fit_pair_model(
    pairs: list[tuple[PaperMention, PaperMention]],
    labels: list[int],
    threshold: float = DEFAULT_THRESHOLD,
    iterations: int = 400,
    learning_rate: float = 0.5,
) -> PairScoreModel:
    """Fit the logistic pairwise scorer on labeled mention pairs."""
    if not pairs:
        raise TrainingError("empty training set")
    x = np.stack([pair_features(a, b) for a, b in pairs])
    y = np.asarray(labels, dtype=np.float64)
    try:
        model = fit_logistic(x, y, iterations=iterations, learning_rate=learning_rate)
    except ValueError as exc:
        raise TrainingError(str(exc)) from exc
    scores = 1.0 / (1.0 + np.exp(-(x @ model.weights + model.bias)))
    auc = roc_auc(scores, np.asarray(labels))
    return PairScoreModel(
        feature_names=list(FEATURE_NAMES),
        weights=model.weights,
        bias=model.bias,
        threshold=threshold,
        train_auc=auc,
    )


class UnionFind:
    """Classic disjoint-set forest with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1


def cluster_block(
    mentions: list[PaperMention],
    model: PairScoreModel,
    threshold: float | None = None,
) -> list[list[PaperMention]]:
    """Partition one block by union-find over above-threshold pairs.

    Pairs with conflicting DOIs are never unioned directly (hard veto),
    though they may still end up together transitively.
    """
    if threshold is None:
        threshold = model.threshold
    n = len(mentions)
    if n <= 1:
        return [list(mentions)] if mentions else []
    contexts = [_MentionContext(m) for m in mentions]
    uf = UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if _doi_conflict(contexts[i], contexts[j]):
                continue
            score = model.score(_context_pair_features(contexts[i], contexts[j]))
            if score >= threshold:
                uf.union(i, j)
    groups: dict[int, list[int]] = {}
    order: list[int] = []
    for i in range(n):
        root = uf.find(i)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(i)
    return [[mentions[i] for i in groups[root]] for root in order]


@dataclass
class DedupResult:
    """Canonical papers plus the mention-to-paper assignment."""

    papers: list[Paper]
    mention_to_corpus_id: dict[str, int]
    violations: list[str] = field(default_factory=list)


def _merged_blocks(mentions: list[PaperMention]) -> list[list[int]]:
    """Union blocks that share a mention, so multi-key mentions cannot split."""
    uf = UnionFind(len(mentions))
    first_with_key: dict[str, int] = {}
    for i, m in enumerate(mentions):
        for key in block_key(m):
            if key in first_with_key:
                uf.union(first_with_key[key], i)
            else:
                first_with_key[key] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(mentions)):
        groups.setdefault(uf.find(i), []).append(i)
    return [sorted(v) for _, v in sorted(groups.items())]


def _majority_value(values: list[str]) -> str:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return min(counts, key=lambda v: (-counts[v], v))


def _canonical_paper(corpus_id: int, members: list[PaperMention], violations: list[str]) -> Paper:
    title = max((m.title for m in members), key=lambda t: (len(t), t))
    abstract = max((m.abstract for m in members), key=lambda t: (len(t), t))
    venues = [m.venue_raw for m in members if m.venue_raw]
    venue_raw = _majority_value(venues) if venues else ""
    dated = [(m.pub_date, m.date_precision) for m in members if m.pub_date]
    if dated:
        pub_date, precision = min(dated)
    else:
        pub_date, precision = "", ""
    # Longest author list wins; ties go to the smallest mention id.
    best_len = max(len(m.authors) for m in members)
    authors_source = min(
        (m for m in members if len(m.authors) == best_len), key=lambda m: m.mention_id
    )

    external_ids: dict[str, str] = {}
    for kind in _ID_KINDS:
        values = [m.external_ids[kind] for m in members if kind in m.external_ids]
        if not values:
            continue
        if kind == "DOI":
            distinct = {v.lower() for v in values}
            if len(distinct) > 1:
                violations.append(
                    f"paper {corpus_id}: conflicting DOIs {sorted(distinct)}; keeping majority"
                )
            external_ids[kind] = _majority_value([v.lower() for v in values])
        else:
            external_ids[kind] = _majority_value(values)

    return Paper(
        corpus_id=corpus_id,
        member_mentions=sorted(m.mention_id for m in members),
        title=title,
        abstract=abstract,
        venue_raw=venue_raw,
        pub_date=pub_date,
        date_precision=precision,
        authors=[
            AuthorMention(a.raw_name, i, a.affiliation_raw, a.email)
            for i, a in enumerate(authors_source.authors)
        ],
        external_ids=external_ids,
    )


def dedupe_corpus(
    mentions: list[PaperMention],
    model: PairScoreModel,
    threshold: float | None = None,
) -> DedupResult:
    """Full deduplication: block, merge overlapping blocks, cluster, canonicalize.

    Corpus IDs are assigned 1..n in order of each cluster's smallest
    mention id, so the assignment is deterministic for a fixed corpus.
    """
    clusters: list[list[PaperMention]] = []
    for indexes in _merged_blocks(mentions):
        block = [mentions[i] for i in indexes]
        clusters.extend(cluster_block(block, model, threshold))
    clusters.sort(key=lambda c: min(m.mention_id for m in c))

    violations: list[str] = []
    papers: list[Paper] = []
    mention_map: dict[str, int] = {}
    for corpus_id, members in enumerate(clusters, start=1):
        papers.append(_canonical_paper(corpus_id, members, violations))
        for m in members:
            mention_map[m.mention_id] = corpus_id
    return DedupResult(papers=papers, mention_to_corpus_id=mention_map, violations=violations)
