"""Character n-gram TF-IDF vectorization shared by classification and ranking.

The vocabulary is the most frequent character 1..5-grams of the training
texts, capped at a fixed size; IDF is frozen at fit time so transformed
vectors stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .text import char_ngrams, normalize_text

MAX_VOCABULARY = 300_000
NGRAM_MIN = 1
NGRAM_MAX = 5


@dataclass
class CharTfidfVectorizer:
    """Frozen char n-gram TF-IDF transform."""

    vocabulary: dict[str, int] = field(default_factory=dict)
    idf: np.ndarray | None = None
    max_vocabulary: int = MAX_VOCABULARY

    def fit(self, texts: list[str]) -> "CharTfidfVectorizer":
        if self.max_vocabulary < 1:
            raise ValueError("max_vocabulary must be positive")
        totals: dict[str, int] = {}
        doc_freq: dict[str, int] = {}
        n_docs = 0
        for text in texts:
            n_docs += 1
            grams = char_ngrams(normalize_text(text), NGRAM_MIN, NGRAM_MAX)
            for gram, count in grams.items():
                totals[gram] = totals.get(gram, 0) + count
                doc_freq[gram] = doc_freq.get(gram, 0) + 1
        # Most frequent first; lexicographic ties keep the cap deterministic.
        ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[: self.max_vocabulary]
        self.vocabulary = {gram: i for i, (gram, _) in enumerate(ranked)}
        idf = np.zeros(len(self.vocabulary))
        for gram, i in self.vocabulary.items():
            idf[i] = math.log(1.0 + n_docs / doc_freq[gram])
        self.idf = idf
        return self

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def transform_one(self, text: str) -> sparse.csr_matrix:
        """One L2-normalized TF-IDF row; zero row for out-of-vocabulary text."""
        grams = char_ngrams(normalize_text(text), NGRAM_MIN, NGRAM_MAX)
        indices = []
        values = []
        for gram, count in grams.items():
            idx = self.vocabulary.get(gram)
            if idx is not None:
                indices.append(idx)
                values.append(count * self.idf[idx])
        if not indices:
            return sparse.csr_matrix((1, self.dim))
        order = np.argsort(indices)
        indices = np.asarray(indices)[order]
        values = np.asarray(values, dtype=np.float64)[order]
        norm = float(np.linalg.norm(values))
        if norm > 0:
            values = values / norm
        return sparse.csr_matrix((values, (np.zeros(len(indices), dtype=int), indices)), shape=(1, self.dim))

    def transform(self, texts: list[str]) -> sparse.csr_matrix:
        if not texts:
            return sparse.csr_matrix((0, self.dim))
        return sparse.vstack([self.transform_one(t) for t in texts], format="csr")

    def to_dict(self) -> dict:
        return {
            "vocabulary": self.vocabulary,
            "idf": [float(x) for x in (self.idf if self.idf is not None else [])],
            "max_vocabulary": self.max_vocabulary,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CharTfidfVectorizer":
        vec = cls(max_vocabulary=int(obj.get("max_vocabulary", MAX_VOCABULARY)))
        vec.vocabulary = {str(k): int(v) for k, v in obj["vocabulary"].items()}
        vec.idf = np.asarray(obj["idf"], dtype=np.float64)
        return vec
