"""Deterministic string normalization, similarity metrics, and hashed document vectors.

Everything here is a pure function; downstream stages (dedup, citation
linking, author disambiguation, search) build their features out of these
primitives, so determinism and idempotence matter more than linguistic
sophistication.
"""

from __future__ import annotations

import hashlib
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_EMBEDDING_DIM = 256

_WS_RE = re.compile(r"\s+")

# Small fixed suffix set stripped from the end of person names.
_NAME_SUFFIXES = {"jr", "sr", "ii", "iii", "iv"}


def normalize_text(raw: str) -> str:
    """Lowercase, strip diacritics and punctuation, collapse whitespace.

    Compatibility-decomposes the input, drops combining marks, lowercases,
    replaces non-alphanumeric runs with single spaces and trims. Total and
    idempotent; characters with no decomposition (e.g. eszett) pass through
    lowercased.
    """
    text = raw
    for _ in range(4):
        decomposed = unicodedata.normalize("NFKD", text)
        out = []
        prev_space = True
        ascii_only = True
        for ch in decomposed:
            if unicodedata.combining(ch):
                continue
            if ch.isalnum():
                low = ch.lower()
                out.append(low)
                if len(low) != 1 or not ("a" <= low <= "z" or "0" <= low <= "9"):
                    ascii_only = False
                prev_space = False
            elif not prev_space:
                out.append(" ")
                prev_space = True
        result = "".join(out).rstrip()
        # ASCII lowercase output cannot change under a second pass; otherwise
        # lower() may have reintroduced decomposable or cased code points, so
        # iterate to a fixpoint to keep re-normalization a no-op.
        if ascii_only or result == text:
            return result
        text = result
    return text


def tokens(raw: str) -> list[str]:
    """Normalized word tokens of ``raw``."""
    t = normalize_text(raw)
    return t.split(" ") if t else []


def token_set(raw: str) -> frozenset[str]:
    """Normalized word tokens of ``raw`` as a set."""
    return frozenset(tokens(raw))


def jaccard(a: frozenset | set, b: frozenset | set) -> float:
    """Jaccard overlap |a n b| / |a u b|; 1.0 when both sets are empty."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def levenshtein(a: str, b: str) -> int:
    """Edit distance via Hyyro's bit-parallel algorithm.

    Python big ints stand in for the bit vectors, so arbitrary lengths work
    with one word; roughly an order of magnitude faster than the classic DP.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    m = len(a)
    peq: dict[str, int] = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    mask = (1 << m) - 1
    vp = mask
    vn = 0
    score = m
    last = 1 << (m - 1)
    for ch in b:
        eq = peq.get(ch, 0)
        d0 = (((eq & vp) + vp) ^ vp) | eq | vn
        hp = vn | ~(d0 | vp)
        hn = d0 & vp
        if hp & last:
            score += 1
        elif hn & last:
            score -= 1
        hp = ((hp << 1) | 1) & mask
        hn = (hn << 1) & mask
        vp = hn | ~(d0 | hp) & mask
        vn = d0 & hp
    return score


@lru_cache(maxsize=1 << 18)
def _edit_ratio_cached(a: str, b: str) -> float:
    n = max(len(a), len(b))
    if n == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / n


def edit_ratio(a: str, b: str) -> float:
    """Levenshtein similarity 1 - dist/max(len); 1.0 when both empty."""
    if a > b:
        a, b = b, a
    return _edit_ratio_cached(a, b)


def char_ngrams(text: str, n_min: int, n_max: int) -> Counter:
    """Multiset of all contiguous character n-grams for n in [n_min, n_max].

    Spaces count as characters; callers normalize first.
    """
    if n_min < 1 or n_min > n_max:
        raise ValueError(f"invalid n-gram range [{n_min}, {n_max}]")
    grams: Counter = Counter()
    length = len(text)
    for n in range(n_min, min(n_max, length) + 1):
        for i in range(length - n + 1):
            grams[text[i : i + n]] += 1
    return grams


def stable_hash(token: str) -> int:
    """64-bit stable hash of a token (process- and platform-independent)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def embed_document(title: str, abstract: str, dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Feature-hashed document vector over word unigrams and bigrams.

    Hash parity picks the sign so bucket collisions cancel in expectation;
    term weights are log-damped; the result is L2-normalized. Empty input
    yields the zero vector.
    """
    if dim < 16:
        raise ValueError(f"embedding dim must be >= 16, got {dim}")
    words = tokens((title or "") + " " + (abstract or ""))
    if not words:
        return np.zeros(dim, dtype=np.float64)
    counts: Counter = Counter(words)
    counts.update(" ".join(pair) for pair in zip(words, words[1:]))
    vec = np.zeros(dim, dtype=np.float64)
    for tok, count in counts.items():
        h = stable_hash(tok)
        sign = 1.0 - 2.0 * (h & 1)
        bucket = (h >> 1) % dim
        vec[bucket] += sign * (1.0 + math.log(count))
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is zero."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class ParsedName:
    """A person name decomposed into first / middle / last tokens."""

    first: str = ""
    middle: tuple[str, ...] = field(default=())
    last: str = ""

    @property
    def is_mononym(self) -> bool:
        return not self.first and bool(self.last)


def parse_name(raw_name: str) -> ParsedName:
    """Decompose a raw person name into (first, middle, last).

    A single comma with at most two tokens after it is read as the inverted
    "Last, First M." form. Mononyms keep the single token as the last name.
    """
    name = raw_name or ""
    if name.count(",") == 1:
        head, tail = name.split(",")
        if tail.strip() and len(tail.split()) <= 2:
            name = tail + " " + head
    parts = tokens(name)
    while len(parts) > 2 and parts[-1] in _NAME_SUFFIXES:
        parts = parts[:-1]
    if not parts:
        return ParsedName()
    if len(parts) == 1:
        return ParsedName(last=parts[0])
    return ParsedName(first=parts[0], middle=tuple(parts[1:-1]), last=parts[-1])


def name_compatibility(a: str, b: str) -> bool:
    """True when two raw names could plausibly denote the same person.

    Incompatible when normalized last names differ, when two full first
    names disagree beyond edit ratio 0.9, or when first/middle initials
    conflict. Used as a hard cannot-link constraint in author clustering.
    """
    pa = parse_name(a)
    pb = parse_name(b)
    if pa.last != pb.last:
        return False
    if pa.first and pb.first:
        if pa.first[0] != pb.first[0]:
            return False
        if len(pa.first) > 1 and len(pb.first) > 1 and edit_ratio(pa.first, pb.first) < 0.9:
            return False
    if pa.middle and pb.middle:
        ia = [m[0] for m in pa.middle]
        ib = [m[0] for m in pb.middle]
        shorter, longer = (ia, ib) if len(ia) <= len(ib) else (ib, ia)
        if longer[: len(shorter)] != shorter:
            return False
    return True
