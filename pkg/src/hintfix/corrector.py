"""Hypothesis rewriting from a correction context.

Two backends share :class:`CorrectionResult`:

- :func:`correct_reference` is a deterministic aligner-substitutor.  It walks
  the hints nearest-first and replaces a hint's source span with the entity's
  surface form when the span sounds close enough (``d_sub``).
- :func:`correct_remote` sends the rendered context to an external model
  over the completion protocol and returns the completion verbatim.

The reference backend only ever rewrites entity spans; it cannot fix other
words the way a language model might.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

from hintfix.catalog import normalize_text
from hintfix.context import CorrectionContext, Hint, render_context
from hintfix.encoders import dense_distance
from hintfix.exceptions import EncodingError

if TYPE_CHECKING:
    from hintfix.transport import CompletionClient

_logger = logging.getLogger(__name__)

DEFAULT_D_SUB = 0.9


class Backend(StrEnum):
    REFERENCE = "reference"
    REMOTE = "remote"


@dataclass(frozen=True)
class SubstitutionPolicy:
    """When the reference corrector may replace a span.

    Attributes:
        d_sub: Largest dense distance between span text and entity for which
            a substitution is made.
        require_improvement: Skip substitutions whose entity is already
            normalized-equal to the span text.
    """

    d_sub: float = DEFAULT_D_SUB
    require_improvement: bool = True

    def __post_init__(self) -> None:
        if not self.d_sub > 0:
            raise ValueError(f"d_sub must be positive, got {self.d_sub}")


@dataclass(frozen=True)
class Substitution:
    span: tuple[int, int]
    replaced_text: str
    entity_id: int
    replacement: str


@dataclass(frozen=True)
class CorrectionResult:
    """Corrected text plus what was changed to get there."""

    corrected: str
    substitutions: list[Substitution] = field(default_factory=list)
    backend: Backend = Backend.REFERENCE

    @property
    def changed(self) -> bool:
        return bool(self.substitutions)


def _overlaps(span: tuple[int, int], claimed: list[tuple[int, int]]) -> bool:
    return any(span[0] < end and start < span[1] for start, end in claimed)


def _hint_distance(current: str, hint: Hint) -> float | None:
    try:
        return dense_distance(current, hint.entity.normalized)
    except EncodingError:
        _logger.debug("Cannot encode span %r; hint skipped", current)
        return None


def correct_reference(
    ctx: CorrectionContext,
    policy: SubstitutionPolicy | None = None,
) -> CorrectionResult:
    """Substitute hint entities into the hypothesis, nearest hint first.

    A hint whose entity already equals its span text (after normalization)
    claims that span without changing it, so a farther hint cannot overwrite
    a correctly recognized entity.  Spans are never substituted twice.

    Returns:
        The result; ``corrected`` is byte-equal to ``ctx.hypothesis`` when no
        substitution is made.
    """
    policy = policy or SubstitutionPolicy()
    tokens = ctx.hypothesis.split()
    claimed: list[tuple[int, int]] = []
    substitutions: list[Substitution] = []

    for hint in sorted(ctx.hints, key=lambda h: (h.distance, h.entity.id)):
        span = hint.source_query.span
        if span[1] > len(tokens) or _overlaps(span, claimed):
            continue
        current = " ".join(tokens[span[0] : span[1]])
        already_correct = normalize_text(current) == hint.entity.normalized
        if already_correct and policy.require_improvement:
            claimed.append(span)
            continue
        distance = _hint_distance(current, hint)
        if distance is None or distance > policy.d_sub:
            continue
        claimed.append(span)
        substitutions.append(
            Substitution(
                span=span,
                replaced_text=current,
                entity_id=hint.entity.id,
                replacement=hint.entity.surface,
            )
        )

    if not substitutions:
        return CorrectionResult(corrected=ctx.hypothesis, backend=Backend.REFERENCE)

    out: list[str] = []
    by_start = {sub.span[0]: sub for sub in substitutions}
    i = 0
    while i < len(tokens):
        sub = by_start.get(i)
        if sub is None:
            out.append(tokens[i])
            i += 1
        else:
            out.append(sub.replacement)
            i = sub.span[1]
    substitutions.sort(key=lambda sub: sub.span)
    return CorrectionResult(
        corrected=" ".join(out), substitutions=substitutions, backend=Backend.REFERENCE
    )


def correct_remote(ctx: CorrectionContext, client: CompletionClient) -> CorrectionResult:
    """Ask the completion service to rewrite the hypothesis.

    Raises:
        RemoteBackendError: If the request fails or the completion is empty.
    """
    completion = client.complete(render_context(ctx))
    return CorrectionResult(corrected=completion, backend=Backend.REMOTE)
