"""Semantic enrichment: field-of-study labels, influential citations, embeddings.

Field-of-study classification propagates manually-labeled venues to their
papers and trains one-vs-rest linear classifiers over character n-gram
TF-IDF features. Influential-citation classification is a pure heuristic
over citation contexts. Embeddings are the hashed document vectors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import sparse

from .citelink import CitationEdge
from .dedup import Paper
from .errors import TrainingError
from .linear import LinearModel, fit_hinge
from .text import DEFAULT_EMBEDDING_DIM, embed_document
from .vectorize import MAX_VOCABULARY, CharTfidfVectorizer

FIELD_LABELS = [
    "Medicine",
    "Biology",
    "Physics",
    "Engineering",
    "Computer Science",
    "Chemistry",
    "Education",
    "Materials Science",
    "Environmental Science",
    "Economics",
    "Psychology",
    "Agricultural and Food Sciences",
    "Business",
    "Mathematics",
    "History",
    "Political Science",
    "Art",
    "Geology",
    "Sociology",
    "Philosophy",
    "Law",
    "Linguistics",
    "Geography",
]

NOT_APPLICABLE = "n/a"

MIN_EXAMPLES_PER_LABEL = 5

_FIG_TABLE_RE = re.compile(r"\b(table|figure|fig\.?)\s*\d+", re.IGNORECASE)


def load_cue_phrases(path: str | Path | None = None) -> list[str]:
    """Cue phrases signalling influence; defaults to the bundled list."""
    if path is None:
        data = resources.files("stag.data").joinpath("cue_phrases.txt").read_text(encoding="utf-8")
    else:
        data = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in data.splitlines() if line.strip()]


def _cue_patterns(phrases: list[str]) -> list[re.Pattern]:
    return [re.compile(r"\b" + re.escape(p) + r"\b", re.IGNORECASE) for p in phrases]


_DEFAULT_CUES = _cue_patterns(load_cue_phrases())


def _paper_text(paper: Paper) -> str:
    return f"{paper.title} {paper.abstract}"


@dataclass
class FosModel:
    """One-vs-rest linear classifiers over char n-gram TF-IDF features."""

    vectorizer: CharTfidfVectorizer
    labels: list[str]
    weights: dict[str, np.ndarray]
    biases: dict[str, float]
    excluded: list[str] = field(default_factory=list)

    def margins(self, title: str, abstract: str) -> dict[str, float]:
        x = self.vectorizer.transform_one(f"{title} {abstract}")
        out = {}
        for label in self.labels:
            out[label] = float((x @ self.weights[label])[0] + self.biases[label])
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "vectorizer": self.vectorizer.to_dict(),
                "labels": self.labels,
                "weights": {k: [float(x) for x in v] for k, v in self.weights.items()},
                "biases": self.biases,
                "excluded": self.excluded,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FosModel":
        obj = json.loads(text)
        return cls(
            vectorizer=CharTfidfVectorizer.from_dict(obj["vectorizer"]),
            labels=list(obj["labels"]),
            weights={k: np.asarray(v, dtype=np.float64) for k, v in obj["weights"].items()},
            biases={k: float(v) for k, v in obj["biases"].items()},
            excluded=list(obj.get("excluded", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FosModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fos_vectorize(title: str, abstract: str, vectorizer: CharTfidfVectorizer) -> sparse.csr_matrix:
    """TF-IDF row vector for a paper's title+abstract text."""
    return vectorizer.transform_one(f"{title} {abstract}")


def train_fos(
    venue_labels: dict[str, set[str]],
    papers: list[Paper],
    max_vocabulary: int = MAX_VOCABULARY,
    iterations: int = 300,
    learning_rate: float = 0.5,
) -> FosModel:
    """Propagate venue labels to papers and fit one-vs-rest hinge classifiers.

    Labels with fewer than MIN_EXAMPLES_PER_LABEL propagated examples are
    excluded with a warning on the model. Fewer than two usable labels is a
    TrainingError.
    """
    known = set(FIELD_LABELS)
    for venue_id, labels in venue_labels.items():
        bad = set(labels) - known
        if bad:
            raise TrainingError(f"venue {venue_id} has unknown labels {sorted(bad)}")

    examples: list[tuple[Paper, set[str]]] = []
    for paper in sorted(papers, key=lambda p: p.corpus_id):
        if paper.venue_id and paper.venue_id in venue_labels:
            labels = venue_labels[paper.venue_id]
            if labels:
                examples.append((paper, set(labels)))
    if not examples:
        raise TrainingError("no papers fall in a labeled venue")

    counts: dict[str, int] = {}
    for _, labels in examples:
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
    usable = [l for l in FIELD_LABELS if counts.get(l, 0) >= MIN_EXAMPLES_PER_LABEL]
    excluded = sorted(l for l in counts if l not in usable)
    if len(usable) < 2:
        raise TrainingError(
            f"need at least 2 labels with >= {MIN_EXAMPLES_PER_LABEL} examples, got {len(usable)}"
        )

    vectorizer = CharTfidfVectorizer(max_vocabulary=max_vocabulary).fit(
        [_paper_text(p) for p, _ in examples]
    )
    x = vectorizer.transform([_paper_text(p) for p, _ in examples])
    weights: dict[str, np.ndarray] = {}
    biases: dict[str, float] = {}
    for label in usable:
        y = np.asarray([1.0 if label in labels else -1.0 for _, labels in examples])
        try:
            model: LinearModel = fit_hinge(
                x, y, iterations=iterations, learning_rate=learning_rate
            )
        except ValueError as exc:
            raise TrainingError(f"training failed for label {label}: {exc}") from exc
        weights[label] = model.weights
        biases[label] = model.bias
    return FosModel(
        vectorizer=vectorizer,
        labels=usable,
        weights=weights,
        biases=biases,
        excluded=excluded,
    )


def classify_fos(paper: Paper, model: FosModel) -> set[str]:
    """Labels with positive margin; {n/a} when none fire.

    Text with no in-vocabulary n-grams carries no evidence and is always
    unclassified, regardless of the trained biases.
    """
    x = model.vectorizer.transform_one(f"{paper.title} {paper.abstract}")
    if x.nnz == 0:
        return {NOT_APPLICABLE}
    labels = {
        label
        for label in model.labels
        if float((x @ model.weights[label])[0] + model.biases[label]) > 0.0
    }
    return labels if labels else {NOT_APPLICABLE}


def classify_influential(
    edge: CitationEdge,
    citing_authors: set[int],
    cited_authors: set[int],
    cue_patterns: list[re.Pattern] | None = None,
) -> bool:
    """Influence heuristic over citation contexts.

    Citations between papers with overlapping authors are ineligible.
    Otherwise influential iff >= 3 context sentences cite only this paper,
    or any context carries a cue phrase, or any context references a
    figure/table.
    """
    if citing_authors & cited_authors:
        return False
    if cue_patterns is None:
        cue_patterns = _DEFAULT_CUES
    solo = sum(1 for n in edge.context_cite_counts if n == 1)
    if solo >= 3:
        return True
    for sentence in edge.contexts:
        if any(p.search(sentence) for p in cue_patterns):
            return True
        if _FIG_TABLE_RE.search(sentence):
            return True
    return False


def mark_influential_citations(
    edges: list[CitationEdge],
    paper_authors: dict[int, set[int]],
    cue_patterns: list[re.Pattern] | None = None,
) -> None:
    """Set is_influential on every edge, in place."""
    for edge in edges:
        edge.is_influential = classify_influential(
            edge,
            paper_authors.get(edge.citing, set()),
            paper_authors.get(edge.cited, set()),
            cue_patterns,
        )


def assign_embeddings(papers: list[Paper], dim: int = DEFAULT_EMBEDDING_DIM) -> int:
    """Set every paper's embedding from its title+abstract; returns the dim."""
    for paper in papers:
        paper.embedding = embed_document(paper.title, paper.abstract, dim)
    return dim
