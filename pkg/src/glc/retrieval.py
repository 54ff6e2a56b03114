"""Sentence-level inverted index with TF-IDF cosine ranking.

Weights are ``tf * idf`` with ``tf`` the raw count and
``idf(t) = ln(1 + N / df(t))``.  Dot products and squared norms are summed in
ascending token order, and a score is ``dot / sqrt(|a|^2 * |b|^2)``, so
``sim(a, b) == sim(b, a)`` bit for bit and a vector scores exactly 1.0
against itself.
"""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

STOPWORDS_ENV = "GLC_STOPWORDS"
DEFAULT_THRESHOLD = 0.25

_SPLIT_RE = re.compile(r"[^0-9a-z]+")


class DuplicateSentenceError(ValueError):
    pass


def _read_stopwords(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@lru_cache(maxsize=8)
def _stopwords_from(path: str | None) -> frozenset[str]:
    if path is None:
        text = resources.files("glc.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return _read_stopwords(text)


def load_stopwords(path: str | os.PathLike | None = None) -> frozenset[str]:
    """Stopword list from ``path``, else ``$GLC_STOPWORDS``, else the bundled list."""
    if path is None:
        path = os.environ.get(STOPWORDS_ENV) or None
    return _stopwords_from(None if path is None else str(path))


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    if stopwords is None:
        stopwords = load_stopwords()
    tokens = []
    for tok in _SPLIT_RE.split(text.lower()):
        if not tok or tok in stopwords:
            continue
        if len(tok) >= 4 and tok.endswith("s") and not tok.endswith("ss"):
            tok = tok[:-1]
        tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class SentenceRecord:
    doc: str
    index: int
    text: str
    tokens: tuple[str, ...]

    @property
    def ref(self) -> tuple[str, int]:
        return (self.doc, self.index)


def make_record(doc: str, index: int, text: str, stopwords=None) -> SentenceRecord:
    return SentenceRecord(doc, index, text, tuple(tokenize(text, stopwords)))


def load_corpus(directory: str | os.PathLike, stopwords=None) -> list[SentenceRecord]:
    """One guideline per ``*.txt`` file (stem = source id), one sentence per line."""
    records = []
    for path in sorted(Path(directory).glob("*.txt")):
        lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
        for i, line in enumerate(ln for ln in lines if ln):
            records.append(make_record(path.stem, i, line, stopwords))
    return records


@dataclass
class Index:
    postings: dict[str, list[tuple[str, int, int]]]
    doc_freq: dict[str, int]
    total_sentences: int
    records: dict[tuple[str, int], SentenceRecord]
    stopwords: frozenset[str] | None = None
    concepts: Callable[[str], Iterable[str]] | None = None
    # per-sentence weight vectors and squared norms, filled by build_index
    vectors: dict[tuple[str, int], dict[str, float]] = field(default_factory=dict)
    sq_norms: dict[tuple[str, int], float] = field(default_factory=dict)

    def idf(self, token: str) -> float:
        df = self.doc_freq.get(token, 0)
        if df == 0:
            return 0.0
        return math.log(1 + self.total_sentences / df)

    def terms(self, text: str, tokens: Sequence[str] | None = None) -> Counter:
        """Token counts for ``text`` including concept tokens, if configured."""
        if tokens is None:
            tokens = tokenize(text, self.stopwords)
        counts = Counter(tokens)
        if self.concepts is not None:
            counts.update(self.concepts(text))
        return counts

    def weigh(self, counts: Counter) -> dict[str, float]:
        vec = {}
        for tok in sorted(counts):
            w = counts[tok] * self.idf(tok)
            if w > 0:
                vec[tok] = w
        return vec


def _sq_norm(vec: dict[str, float]) -> float:
    total = 0.0
    for tok in sorted(vec):
        total += vec[tok] * vec[tok]
    return total


def _cosine(dot: float, sq_a: float, sq_b: float) -> float:
    if dot <= 0.0 or sq_a == 0.0 or sq_b == 0.0:
        return 0.0
    return min(1.0, dot / math.sqrt(sq_a * sq_b))


def build_index(
    sentences: Sequence[SentenceRecord],
    stopwords: frozenset[str] | None = None,
    concepts: Callable[[str], Iterable[str]] | None = None,
) -> Index:
    """Index sentence records.  ``concepts`` maps a sentence to extra tokens
    (e.g. ``concept:screening``) that are indexed alongside its words."""
    records: dict[tuple[str, int], SentenceRecord] = {}
    for rec in sentences:
        if rec.ref in records:
            raise DuplicateSentenceError(f"duplicate sentence {rec.ref}")
        records[rec.ref] = rec

    index = Index({}, {}, len(records), records, stopwords, concepts)
    counts = {ref: index.terms(rec.text, rec.tokens) for ref, rec in records.items()}
    postings: dict[str, list[tuple[str, int, int]]] = {}
    for ref in sorted(counts):
        for tok, tf in counts[ref].items():
            postings.setdefault(tok, []).append((ref[0], ref[1], tf))
    index.postings = {tok: postings[tok] for tok in sorted(postings)}
    index.doc_freq = {tok: len(plist) for tok, plist in index.postings.items()}
    for ref, c in counts.items():
        vec = index.weigh(c)
        index.vectors[ref] = vec
        index.sq_norms[ref] = _sq_norm(vec)
    return index


def similarity(index: Index, a: tuple[str, int], b: tuple[str, int]) -> float:
    va, vb = index.vectors[a], index.vectors[b]
    dot = 0.0
    for tok in sorted(va.keys() & vb.keys()):
        dot += va[tok] * vb[tok]
    return _cosine(dot, index.sq_norms[a], index.sq_norms[b])


def score_all(index: Index, query: str) -> dict[tuple[str, int], float]:
    """Cosine score of ``query`` against every sentence sharing a term with it."""
    qvec = index.weigh(index.terms(query))
    if not qvec:
        return {}
    q_sq = _sq_norm(qvec)
    dots: dict[tuple[str, int], float] = {}
    for tok in sorted(qvec):
        wq = qvec[tok]
        for doc, i, _ in index.postings.get(tok, ()):
            ref = (doc, i)
            dots[ref] = dots.get(ref, 0.0) + wq * index.vectors[ref][tok]
    return {ref: _cosine(dot, q_sq, index.sq_norms[ref]) for ref, dot in dots.items()}


def rank(scores: dict[tuple[str, int], float]) -> list[tuple[tuple[str, int], float]]:
    return sorted(((r, s) for r, s in scores.items() if s > 0), key=lambda rs: (-rs[1], rs[0]))


def top_k(index: Index, query: str, k: int, doc: str | None = None) -> list[tuple[SentenceRecord, float]]:
    """Best ``k`` sentences for ``query``; ``doc`` restricts to one document."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, query)
    if doc is not None:
        scores = {r: s for r, s in scores.items() if r[0] == doc}
    return [(index.records[r], s) for r, s in rank(scores)[:k]]


def candidate_pairs(
    index: Index, sentences: Sequence[SentenceRecord], threshold: float = DEFAULT_THRESHOLD
) -> list[tuple[SentenceRecord, SentenceRecord, float]]:
    """Cross-document sentence pairs scoring at least ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    recs = sorted(sentences, key=lambda r: r.ref)
    out = []
    for i, a in enumerate(recs):
        for b in recs[i + 1:]:
            if a.doc == b.doc:
                continue
            score = similarity(index, a.ref, b.ref)
            if score >= threshold:
                out.append((a, b, score))
    out.sort(key=lambda t: (-t[2], t[0].ref, t[1].ref))
    return out
