"""Tests for the reference and remote correctors."""

from __future__ import annotations

from unittest.mock import MagicMock

import pytest

from hintfix.catalog import EntityCatalog
from hintfix.context import CorrectionContext, Hint, no_hints_context
from hintfix.corrector import (
    Backend,
    SubstitutionPolicy,
    correct_reference,
    correct_remote,
)
from hintfix.exceptions import RemoteBackendError
from hintfix.querygen import Query, QueryStrategy

CATALOG = EntityCatalog.from_surfaces(
    ["The Weeknd", "Weekend Wolves", "Metallica", "Tha Weeknd", "Drake"]
)


def _hint(entity_id: int, distance: float, text: str, span: tuple[int, int]) -> Hint:
    return Hint(
        entity=CATALOG.lookup(entity_id),
        distance=distance,
        source_query=Query(text=text, span=span, strategy=QueryStrategy.TEMPLATE),
    )


def _ctx(hypothesis: str, *hints: Hint) -> CorrectionContext:
    return CorrectionContext(hints=hints, hypothesis=hypothesis)


class TestCorrectReference:
    def test_substitutes_close_entity(self) -> None:
        result = correct_reference(_ctx("play the weekend", _hint(0, 0.3, "the weekend", (1, 3))))
        assert result.corrected == "play The Weeknd"
        assert result.changed
        assert result.backend is Backend.REFERENCE
        [sub] = result.substitutions
        assert (sub.span, sub.replaced_text, sub.entity_id) == ((1, 3), "the weekend", 0)

    def test_no_hints_is_identity(self) -> None:
        hypothesis = "play the weekend"
        result = correct_reference(no_hints_context(hypothesis))
        assert result.corrected == hypothesis
        assert not result.changed

    def test_far_entity_not_substituted(self) -> None:
        result = correct_reference(_ctx("play the weekend", _hint(2, 0.4, "the weekend", (1, 3))))
        assert result.corrected == "play the weekend"
        assert result.substitutions == []

    def test_correct_span_is_anchored(self) -> None:
        ctx = _ctx(
            "play the weeknd",
            _hint(0, 0.0, "the weeknd", (1, 3)),
            _hint(1, 0.5, "weeknd", (2, 3)),
        )
        result = correct_reference(ctx)
        assert result.corrected == "play the weeknd"
        assert not result.changed

    def test_anchoring_can_be_disabled(self) -> None:
        ctx = _ctx("play the weeknd", _hint(0, 0.0, "the weeknd", (1, 3)))
        result = correct_reference(ctx, SubstitutionPolicy(require_improvement=False))
        assert result.corrected == "play The Weeknd"

    def test_nearest_hint_wins_overlap(self) -> None:
        ctx = _ctx(
            "play the weekend",
            _hint(0, 0.2, "the weekend", (1, 3)),
            _hint(3, 0.1, "the weekend", (1, 3)),
        )
        result = correct_reference(ctx)
        assert result.corrected == "play Tha Weeknd"
        assert [s.entity_id for s in result.substitutions] == [3]

    def test_multiple_spans(self) -> None:
        ctx = _ctx(
            "play the weekend and drak",
            _hint(4, 0.2, "drak", (4, 5)),
            _hint(0, 0.3, "the weekend", (1, 3)),
        )
        result = correct_reference(ctx)
        assert result.corrected == "play The Weeknd and Drake"
        assert [s.span for s in result.substitutions] == [(1, 3), (4, 5)]

    def test_span_outside_hypothesis_ignored(self) -> None:
        result = correct_reference(_ctx("play drak", _hint(4, 0.1, "drak", (3, 4))))
        assert result.corrected == "play drak"

    def test_unencodable_span_ignored(self) -> None:
        result = correct_reference(_ctx("play ' now", _hint(4, 0.1, "'", (1, 2))))
        assert result.corrected == "play ' now"

    def test_tight_policy(self) -> None:
        ctx = _ctx("play the weekend", _hint(0, 0.3, "the weekend", (1, 3)))
        assert correct_reference(ctx, SubstitutionPolicy(d_sub=1e-9)).corrected == (
            "play the weekend"
        )

    def test_replaced_text_is_hypothesis_span(self) -> None:
        result = correct_reference(_ctx("play THE  weekend", _hint(0, 0.3, "the weekend", (1, 3))))
        assert result.corrected == "play The Weeknd"
        assert result.substitutions[0].replaced_text == "THE weekend"

    @pytest.mark.parametrize(
        ("hypothesis", "hints"),
        [
            ("play the weekend", [(0, 0.3, "the weekend", (1, 3))]),
            (
                "play the weekend and drak",
                [(4, 0.2, "drak", (4, 5)), (0, 0.3, "the weekend", (1, 3))],
            ),
            (
                "play tha weekend",
                [(3, 0.1, "tha weekend", (1, 3)), (0, 0.2, "tha weekend", (1, 3))],
            ),
        ],
    )
    def test_second_pass_changes_nothing(
        self, hypothesis: str, hints: list[tuple[int, float, str, tuple[int, int]]]
    ) -> None:
        built = [_hint(*h) for h in hints]
        first = correct_reference(_ctx(hypothesis, *built))
        assert first.changed

        second = correct_reference(_ctx(first.corrected, *built))

        assert second.substitutions == []
        assert second.corrected == first.corrected

    @pytest.mark.parametrize(
        "hypothesis",
        ["play the weekend", "play the weekend and drak", "put on metalica now"],
    )
    def test_vanishing_cutoff_is_identity(self, hypothesis: str) -> None:
        tokens = hypothesis.split()
        hints = [
            _hint(entity.id, 0.1 * entity.id, " ".join(tokens[i:j]), (i, j))
            for entity in CATALOG
            for i in range(len(tokens))
            for j in range(i + 1, min(i + 3, len(tokens)) + 1)
        ]
        result = correct_reference(_ctx(hypothesis, *hints), SubstitutionPolicy(d_sub=1e-12))
        assert result.corrected == hypothesis
        assert not result.changed

    @pytest.mark.parametrize("d_sub", [0.0, -1.0])
    def test_invalid_policy(self, d_sub: float) -> None:
        with pytest.raises(ValueError, match="d_sub"):
            SubstitutionPolicy(d_sub=d_sub)


class TestCorrectRemote:
    def test_sends_rendered_context(self) -> None:
        client = MagicMock()
        client.complete.return_value = "play the weeknd"
        ctx = _ctx("play the weekend", _hint(0, 0.3, "the weekend", (1, 3)))
        result = correct_remote(ctx, client)
        client.complete.assert_called_once_with("[H] The Weeknd [A] play the weekend [P]")
        assert result.corrected == "play the weeknd"
        assert result.backend is Backend.REMOTE

    def test_failure_propagates(self) -> None:
        client = MagicMock()
        client.complete.side_effect = RemoteBackendError("timeout")
        with pytest.raises(RemoteBackendError):
            correct_remote(no_hints_context("play drake"), client)
