"""Okapi BM25 sparse scoring over catalog entities.

Documents are the whitespace-tokenized normalized entity forms.  Scores use

    score(D, Q) = sum over q in Q of
        IDF(q) * f(q, D) * (k1 + 1) / (f(q, D) + k1 * (1 - b + b * |D| / avgdl))

    IDF(q) = ln((N - n(q) + 0.5) / (n(q) + 0.5) + 1)

The ``+ 1`` inside the logarithm keeps IDF non-negative, so every score is
``>= 0`` and top-k thresholding stays meaningful.  Query terms are summed in
sorted order, which makes scores exactly invariant to query term order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from hintfix.catalog import EntityCatalog
from hintfix.exceptions import EncodingError, EntityNotFoundError

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass(frozen=True)
class Bm25Index:
    """Term statistics plus an inverted index (term -> [(entity_id, tf)])."""

    doc_term_freqs: tuple[Counter[str], ...]
    doc_lengths: tuple[int, ...]
    avgdl: float
    doc_count: int
    df: dict[str, int]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    postings: dict[str, tuple[tuple[int, int], ...]] = field(default_factory=dict, repr=False)
    idf: dict[str, float] = field(default_factory=dict, repr=False)

    def term_weight(self, term: str, entity_id: int) -> float:
        """Contribution of a single query term to the score of *entity_id*."""
        freq = self.doc_term_freqs[entity_id].get(term, 0)
        if freq == 0:
            return 0.0
        length_norm = 1 - self.b + self.b * self.doc_lengths[entity_id] / self.avgdl
        return self.idf[term] * freq * (self.k1 + 1) / (freq + self.k1 * length_norm)


def _idf(doc_count: int, doc_freq: int) -> float:
    return math.log((doc_count - doc_freq + 0.5) / (doc_freq + 0.5) + 1)


def bm25_build(
    catalog: EntityCatalog,
    *,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Bm25Index:
    """Build a BM25 index over the catalog's normalized forms.

    Raises:
        EncodingError: If the catalog is empty.
    """
    if len(catalog) == 0:
        raise EncodingError("Cannot build a BM25 index over an empty catalog")

    term_freqs: list[Counter[str]] = []
    lengths: list[int] = []
    df: Counter[str] = Counter()
    postings: dict[str, list[tuple[int, int]]] = {}
    for entity in catalog:
        tokens = entity.normalized.split()
        counts = Counter(tokens)
        term_freqs.append(counts)
        lengths.append(len(tokens))
        for term, freq in counts.items():
            df[term] += 1
            postings.setdefault(term, []).append((entity.id, freq))

    doc_count = len(lengths)
    return Bm25Index(
        doc_term_freqs=tuple(term_freqs),
        doc_lengths=tuple(lengths),
        avgdl=sum(lengths) / doc_count,
        doc_count=doc_count,
        df=dict(df),
        k1=k1,
        b=b,
        postings={term: tuple(entries) for term, entries in postings.items()},
        idf={term: _idf(doc_count, freq) for term, freq in df.items()},
    )


def query_terms(query: str) -> list[str]:
    """Query terms in scoring order (sorted; repeated terms count repeatedly)."""
    return sorted(query.split())


def bm25_score(index: Bm25Index, query: str, entity_id: int) -> float:
    """BM25 score of entity *entity_id* for the normalized *query*.

    Terms absent from the corpus contribute 0.

    Raises:
        EntityNotFoundError: If *entity_id* is not in the index.
    """
    if not 0 <= entity_id < index.doc_count:
        raise EntityNotFoundError(entity_id)
    score = 0.0
    for term in query_terms(query):
        if term in index.idf:
            score += index.term_weight(term, entity_id)
    return score


def bm25_scores(index: Bm25Index, query: str) -> dict[int, float]:
    """Scores of every entity sharing at least one term with *query*.

    Accumulates through the postings in the same term order as
    :func:`bm25_score`, so values are bitwise-equal to per-entity scoring.
    """
    scores: dict[int, float] = {}
    for term in query_terms(query):
        for entity_id, _ in index.postings.get(term, ()):
            scores[entity_id] = scores.get(entity_id, 0.0) + index.term_weight(term, entity_id)
    return scores
