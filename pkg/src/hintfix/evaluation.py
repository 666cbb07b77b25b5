"""Evaluation metrics: word error rate, retrieval recall@k, WER reduction.

Both sides of every WER computation go through :func:`normalize_text`, so
casing and punctuation carried by entity surface forms are never counted as
errors.  Corpus WER pools edit and reference-word counts over all records
rather than averaging per-utterance rates.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

from hintfix.catalog import normalize_text
from hintfix.exceptions import EvaluationError
from hintfix.querygen import Query
from hintfix.synth import EvalRecord
from hintfix.vectordb import Retriever, retrieve_grouped

DEFAULT_K_VALUES: tuple[int, ...] = (1, 5, 10)

QueryGenerator = Callable[[str], list[Query]]


@dataclass(frozen=True)
class WerBreakdown:
    """Edit counts of one alignment (or a pool of alignments)."""

    substitutions: int
    insertions: int
    deletions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_words

    def __add__(self, other: WerBreakdown) -> WerBreakdown:
        return WerBreakdown(
            substitutions=self.substitutions + other.substitutions,
            insertions=self.insertions + other.insertions,
            deletions=self.deletions + other.deletions,
            ref_words=self.ref_words + other.ref_words,
        )


def _align(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int]:
    """Minimal-edit alignment counts (S, I, D).

    Among optimal alignments the backtrace prefers a diagonal step
    (match/substitution), then insertion, then deletion.
    """
    rows, cols = len(ref) + 1, len(hyp) + 1
    cost = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        cost[i][0] = i
    for j in range(cols):
        cost[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            diagonal = cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            cost[i][j] = min(diagonal, cost[i][j - 1] + 1, cost[i - 1][j] + 1)

    subs = ins = dels = 0
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            mismatch = ref[i - 1] != hyp[j - 1]
            if cost[i][j] == cost[i - 1][j - 1] + mismatch:
                subs += mismatch
                i, j = i - 1, j - 1
                continue
        if j > 0 and cost[i][j] == cost[i][j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return subs, ins, dels


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance between two token sequences (unit costs)."""
    return sum(_align(a, b))


def wer(reference: str, hypothesis: str) -> WerBreakdown:
    """Word error rate of *hypothesis* against *reference*.

    Examples:
        >>> wer("play the weeknd", "play the weekend").wer
        0.3333333333333333

    Raises:
        EvaluationError: If the reference is empty after normalization.
    """
    ref = normalize_text(reference).split()
    if not ref:
        raise EvaluationError("Reference transcript is empty")
    hyp = normalize_text(hypothesis).split()
    subs, ins, dels = _align(ref, hyp)
    return WerBreakdown(substitutions=subs, insertions=ins, deletions=dels, ref_words=len(ref))


def pool(breakdowns: Iterable[WerBreakdown]) -> WerBreakdown:
    """Pool edit counts over a corpus.

    Raises:
        EvaluationError: If the pooled reference word count is zero.
    """
    total = WerBreakdown(0, 0, 0, 0)
    for breakdown in breakdowns:
        total = total + breakdown
    if total.ref_words == 0:
        raise EvaluationError("Corpus has no reference words")
    return total


def relative_reduction(baseline: float, corrected: float) -> float:
    """``(baseline - corrected) / baseline``; 0.0 when the baseline is 0."""
    if baseline == 0:
        return 0.0
    return (baseline - corrected) / baseline


@dataclass(frozen=True)
class CorpusWer:
    """Pooled WER with and without correction."""

    baseline: WerBreakdown
    corrected: WerBreakdown

    @property
    def reduction(self) -> float:
        return relative_reduction(self.baseline.wer, self.corrected.wer)


def corpus_wer(records: Sequence[EvalRecord], corrected: Sequence[str]) -> CorpusWer:
    """Pooled WER of raw hypotheses vs. *corrected* outputs (same order).

    Raises:
        EvaluationError: If the record set is empty or the lengths differ.
    """
    if not records:
        raise EvaluationError("Cannot compute corpus WER over zero records")
    if len(records) != len(corrected):
        raise EvaluationError(
            f"Got {len(corrected)} corrected outputs for {len(records)} records"
        )
    return CorpusWer(
        baseline=pool(wer(r.reference, r.hypothesis) for r in records),
        corrected=pool(wer(r.reference, out) for r, out in zip(records, corrected, strict=True)),
    )


# ---------------------------------------------------------------------------
# Recall
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecallReport:
    """Fraction of gold entities found in the top-k candidates."""

    k_values: tuple[int, ...]
    recall_at_k: dict[int, float] = field(default_factory=dict)
    evaluated: int = 0

    def gain(self, low: int = 1, high: int = 5) -> float:
        """Recall gained by widening the cut-off from *low* to *high*."""
        return self.recall_at_k[high] - self.recall_at_k[low]


def recall_at_k(
    records: Iterable[EvalRecord],
    retriever: Retriever,
    querygen: QueryGenerator,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> RecallReport:
    """Recall@k of *retriever* over the queries *querygen* derives per record.

    A record is recalled at k when its gold entity is among the top-k results
    of any of its queries.  Records without a gold entity are skipped.

    Raises:
        EvaluationError: If no record carries a gold entity.
    """
    ks = tuple(sorted(set(k_values)))
    if not ks or ks[0] < 1:
        raise EvaluationError(f"k values must be positive, got {k_values}")
    widest = ks[-1]
    hits = dict.fromkeys(ks, 0)
    evaluated = 0
    for record in records:
        if record.gold_entity_id is None:
            continue
        evaluated += 1
        queries = querygen(normalize_text(record.hypothesis))
        results = retrieve_grouped(retriever, queries, widest)
        for k in ks:
            if any(
                hit.entity_id == record.gold_entity_id for group in results for hit in group[:k]
            ):
                hits[k] += 1
    if evaluated == 0:
        raise EvaluationError("No record carries a gold entity")
    return RecallReport(
        k_values=ks,
        recall_at_k={k: hits[k] / evaluated for k in ks},
        evaluated=evaluated,
    )
