"""Candidate filtering and correction-context serialization.

Grammar of a rendered context (single spaces, no trailing newline)::

    context    = { hint " " } "[A] " hypothesis " [P]"
    hint       = "[H] " entity                      ; entity-only format
               | "[H] " query-text " :: " entity    ; entity+query format

*entity* is the surface form as stored in the catalog.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from hintfix.catalog import Entity, EntityCatalog
from hintfix.querygen import Query
from hintfix.vectordb import RetrievalKind, RetrievedEntity

HINT_MARKER = "[H]"
HYPOTHESIS_MARKER = "[A]"
PROMPT_MARKER = "[P]"
QUERY_SEPARATOR = " :: "


@dataclass(frozen=True)
class Hint:
    entity: Entity
    distance: float
    source_query: Query
    include_query: bool = False

    def render(self) -> str:
        if self.include_query:
            return f"{HINT_MARKER} {self.source_query.text}{QUERY_SEPARATOR}{self.entity.surface}"
        return f"{HINT_MARKER} {self.entity.surface}"


@dataclass(frozen=True)
class CorrectionContext:
    """Filtered hints plus the hypothesis they apply to."""

    hints: tuple[Hint, ...]
    hypothesis: str

    @property
    def entity_ids(self) -> list[int]:
        return [hint.entity.id for hint in self.hints]


def filter_candidates(
    candidates: Iterable[RetrievedEntity],
    d_max: float,
    r_max: int,
) -> list[RetrievedEntity]:
    """Apply the D_max threshold and R_max cap, then dedup across queries.

    Per source query (in order of first appearance): drop dense candidates
    farther than *d_max*, keep the first *r_max*.  Across queries keep the
    minimum-distance occurrence of each entity.  Sparse pseudo-distances are
    never thresholded.

    Returns:
        Survivors sorted by ascending distance, ties by ascending entity id.
    """
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    groups: dict[Query, list[RetrievedEntity]] = {}
    for candidate in candidates:
        groups.setdefault(candidate.source_query, []).append(candidate)

    best: dict[int, RetrievedEntity] = {}
    for group in groups.values():
        kept = [
            c for c in group if c.kind is not RetrievalKind.DENSE or c.distance <= d_max
        ][:r_max]
        for candidate in kept:
            current = best.get(candidate.entity_id)
            if current is None or candidate.distance < current.distance:
                best[candidate.entity_id] = candidate
    return sorted(best.values(), key=lambda c: c.sort_key)


def build_context(
    hypothesis: str,
    candidates: Sequence[RetrievedEntity],
    catalog: EntityCatalog,
    *,
    include_query: bool = False,
) -> CorrectionContext:
    """Resolve filtered candidates against the catalog into a context."""
    hints = tuple(
        Hint(
            entity=catalog.lookup(candidate.entity_id),
            distance=candidate.distance,
            source_query=candidate.source_query,
            include_query=include_query,
        )
        for candidate in candidates
    )
    return CorrectionContext(hints=hints, hypothesis=hypothesis)


def render_context(ctx: CorrectionContext) -> str:
    """Serialize *ctx* in the ``[H] ... [A] ... [P]`` format.

    Examples:
        >>> render_context(CorrectionContext(hints=(), hypothesis="play the weekend"))
        '[A] play the weekend [P]'
    """
    parts = [hint.render() for hint in ctx.hints]
    parts.append(f"{HYPOTHESIS_MARKER} {ctx.hypothesis} {PROMPT_MARKER}")
    return " ".join(parts)


@dataclass(frozen=True)
class ParsedHint:
    """A hint read back from a rendered context."""

    entity: str
    query: str | None = None


@dataclass(frozen=True)
class ParsedContext:
    hints: tuple[ParsedHint, ...]
    hypothesis: str


def parse_context(text: str, *, include_query: bool = False) -> ParsedContext:
    """Inverse of :func:`render_context`.

    Raises:
        ValueError: If *text* does not follow the context grammar.
    """
    tail = f" {PROMPT_MARKER}"
    if not text.endswith(tail):
        raise ValueError(f"Context does not end with {PROMPT_MARKER!r}")
    head_marker = f"{HYPOTHESIS_MARKER} "
    split_at = text.rfind(head_marker)
    if split_at < 0:
        raise ValueError(f"Context has no {HYPOTHESIS_MARKER!r} marker")
    hypothesis = text[split_at + len(head_marker) : -len(tail)]
    prefix = text[:split_at]
    if not prefix:
        return ParsedContext(hints=(), hypothesis=hypothesis)

    marker = f"{HINT_MARKER} "
    if not prefix.startswith(marker) or not prefix.endswith(" "):
        raise ValueError("Malformed hint section")
    bodies = prefix[len(marker) : -1].split(f" {marker}")
    hints: list[ParsedHint] = []
    for body in bodies:
        if include_query:
            query, sep, entity = body.partition(QUERY_SEPARATOR)
            if not sep:
                raise ValueError(f"Hint {body!r} lacks the query separator")
            hints.append(ParsedHint(entity=entity, query=query))
        else:
            hints.append(ParsedHint(entity=body))
    return ParsedContext(hints=tuple(hints), hypothesis=hypothesis)


def no_hints_context(hypothesis: str) -> CorrectionContext:
    return CorrectionContext(hints=(), hypothesis=hypothesis)
