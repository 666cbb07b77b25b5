"""Query generation: propose hypothesis spans to look up in the catalog.

Three strategies produce :class:`Query` objects over the whitespace tokens of
a normalized hypothesis:

- ``all_ngrams``: every contiguous span up to ``n_max`` tokens.
- ``template``: the single capture group of each matching regular expression.
- ``ne_tag``: spans marked by a pluggable :class:`NeTagger`.

Template file format (UTF-8, ``#`` starts a comment line, one pattern per
line, no implicit anchoring)::

    ^play (.+)$
    ^put on (.+)$
"""

from __future__ import annotations

import logging
import re
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import TYPE_CHECKING

from hintfix.exceptions import DataError, MalformedCompletionError, TemplateError

if TYPE_CHECKING:
    from hintfix.transport import CompletionClient

_logger = logging.getLogger(__name__)

TokenSpan = tuple[int, int]

#: Music-domain patterns used when no template file is configured.
DEFAULT_TEMPLATES: tuple[str, ...] = (
    r"^play (.+)$",
    r"^put on (.+)$",
    r"^i want to hear (.+)$",
    r"^shuffle (.+)$",
    r"^queue up (.+)$",
    r"^can you play (.+)$",
    r"^listen to (.+)$",
)

_TOKEN_RE = re.compile(r"\S+")
_BRACKET_RE = re.compile(r"([\[\]])")


class QueryStrategy(StrEnum):
    """Query generation strategies."""

    ALL_NGRAMS = "all_ngrams"
    TEMPLATE = "template"
    NE_TAG = "ne_tag"


@dataclass(frozen=True)
class Query:
    """A hypothesis span proposed for retrieval.

    *span* is the half-open token interval ``[start, end)`` and *text* is the
    space-join of those hypothesis tokens.
    """

    text: str
    span: TokenSpan
    strategy: QueryStrategy

    def __post_init__(self) -> None:
        start, end = self.span
        if not 0 <= start < end:
            raise ValueError(f"Invalid token span {self.span}")

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    @classmethod
    def from_tokens(
        cls,
        tokens: Sequence[str],
        span: TokenSpan,
        strategy: QueryStrategy,
    ) -> Query:
        start, end = span
        if end > len(tokens):
            raise ValueError(f"Span {span} exceeds {len(tokens)} tokens")
        return cls(text=" ".join(tokens[start:end]), span=span, strategy=strategy)


def tokenize(hypothesis: str) -> list[str]:
    """Whitespace tokens of a normalized hypothesis."""
    return hypothesis.split()


# ---------------------------------------------------------------------------
# All n-grams
# ---------------------------------------------------------------------------


def all_ngrams(hypothesis: str, n_max: int) -> list[Query]:
    """Every contiguous token span of length ``1..min(n_max, L)``.

    Ordered by start token, then by length.  Identical strings at different
    positions are kept as distinct queries.

    Examples:
        >>> [q.text for q in all_ngrams("play dark side", 2)]
        ['play', 'play dark', 'dark', 'dark side', 'side']
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    tokens = tokenize(hypothesis)
    return [
        Query.from_tokens(tokens, (start, end), QueryStrategy.ALL_NGRAMS)
        for start in range(len(tokens))
        for end in range(start + 1, min(start + n_max, len(tokens)) + 1)
    ]


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplateSet:
    """Ordered single-capture-group patterns."""

    patterns: tuple[re.Pattern[str], ...]

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def sources(self) -> list[str]:
        return [pattern.pattern for pattern in self.patterns]


def compile_templates(patterns: Iterable[str]) -> TemplateSet:
    """Compile and validate template patterns.

    Raises:
        TemplateError: If a pattern does not compile or does not have exactly
            one capture group.
    """
    compiled: list[re.Pattern[str]] = []
    for source in patterns:
        try:
            pattern = re.compile(source)
        except re.error as exc:
            raise TemplateError(source, str(exc)) from exc
        if pattern.groups != 1:
            raise TemplateError(
                source, f"expected exactly one capture group, found {pattern.groups}"
            )
        compiled.append(pattern)
    return TemplateSet(patterns=tuple(compiled))


def default_templates() -> TemplateSet:
    return compile_templates(DEFAULT_TEMPLATES)


def load_templates(path: Path) -> TemplateSet:
    """Load a template file (one pattern per line, ``#`` comments).

    Surrounding whitespace on each line is stripped.

    Raises:
        DataError: If the file cannot be read.
        TemplateError: If a pattern is invalid.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot read template file {path}: {exc}") from exc
    lines = [line.strip() for line in text.splitlines()]
    templates = compile_templates(line for line in lines if line and not line.startswith("#"))
    _logger.debug("Loaded %d templates from %s", len(templates), path)
    return templates


def _covering_span(
    token_offsets: Sequence[TokenSpan], char_start: int, char_end: int
) -> TokenSpan | None:
    """Snap a character range outward to the tokens it touches."""
    touched = [
        i for i, (start, end) in enumerate(token_offsets) if end > char_start and start < char_end
    ]
    if not touched:
        return None
    return touched[0], touched[-1] + 1


def template_match(hypothesis: str, templates: TemplateSet) -> list[Query]:
    """Emit the capture group of each matching template as a query.

    Capture spans that do not align with token boundaries are expanded to the
    covering tokens; duplicate ``(text, span)`` pairs are dropped.
    """
    tokens = tokenize(hypothesis)
    offsets = [match.span() for match in _TOKEN_RE.finditer(hypothesis)]
    seen: set[tuple[str, TokenSpan]] = set()
    queries: list[Query] = []
    for pattern in templates.patterns:
        match = pattern.search(hypothesis)
        if match is None or match.group(1) is None:
            continue
        span = _covering_span(offsets, *match.span(1))
        if span is None:
            continue
        query = Query.from_tokens(tokens, span, QueryStrategy.TEMPLATE)
        if (query.text, query.span) in seen:
            continue
        seen.add((query.text, query.span))
        queries.append(query)
    return queries


# ---------------------------------------------------------------------------
# Named-entity region tagging
# ---------------------------------------------------------------------------


class NeTagger(ABC):
    """Marks token spans of a hypothesis that likely hold a named entity."""

    @abstractmethod
    def tag(self, hypothesis: str) -> list[TokenSpan]:
        """Return entity token spans in hypothesis order.

        Raises:
            MalformedCompletionError: If a model-backed tagger produced output
                that cannot be parsed.
        """


class TemplateTagger(NeTagger):
    """Tagger backed by :func:`template_match`."""

    def __init__(self, templates: TemplateSet) -> None:
        self.templates = templates

    def tag(self, hypothesis: str) -> list[TokenSpan]:
        return [query.span for query in template_match(hypothesis, self.templates)]


def parse_bracketed_spans(completion: str, token_count: int) -> list[TokenSpan]:
    """Read ``[ ... ]`` regions of a tagged hypothesis as token spans.

    Examples:
        >>> parse_bracketed_spans("play [ the weekend ]", 3)
        [(1, 3)]

    Raises:
        MalformedCompletionError: On unbalanced or nested brackets, or when the
            untagged token count differs from *token_count*.
    """
    spans: list[TokenSpan] = []
    position = 0
    open_at: int | None = None
    for piece in _BRACKET_RE.sub(r" \1 ", completion).split():
        if piece == "[":
            if open_at is not None:
                raise MalformedCompletionError("nested '[' in tagger output")
            open_at = position
        elif piece == "]":
            if open_at is None:
                raise MalformedCompletionError("unmatched ']' in tagger output")
            if position > open_at:
                spans.append((open_at, position))
            open_at = None
        else:
            position += 1
    if open_at is not None:
        raise MalformedCompletionError("unclosed '[' in tagger output")
    if position != token_count:
        raise MalformedCompletionError(
            f"tagger output has {position} tokens, hypothesis has {token_count}"
        )
    return spans


class RemoteTagger(NeTagger):
    """Tagger backed by an external model behind the completion protocol.

    The prompt is ``[A] <hypothesis> [E]``; the model answers with the
    hypothesis where entity regions are wrapped in square brackets.
    """

    def __init__(self, client: CompletionClient) -> None:
        self.client = client

    @staticmethod
    def prompt(hypothesis: str) -> str:
        return f"[A] {hypothesis} [E]"

    def tag(self, hypothesis: str) -> list[TokenSpan]:
        completion = self.client.complete(self.prompt(hypothesis))
        return parse_bracketed_spans(completion, len(tokenize(hypothesis)))


def ne_tag(hypothesis: str, tagger: NeTagger) -> list[Query]:
    """Turn the tagger's spans into queries.

    Malformed tagger output yields an empty list and a logged warning;
    transport failures propagate.
    """
    tokens = tokenize(hypothesis)
    try:
        spans = tagger.tag(hypothesis)
    except MalformedCompletionError as exc:
        _logger.warning("Ignoring malformed tagger output for %r: %s", hypothesis, exc)
        return []
    queries: list[Query] = []
    for span in dict.fromkeys(spans):
        if 0 <= span[0] < span[1] <= len(tokens):
            queries.append(Query.from_tokens(tokens, span, QueryStrategy.NE_TAG))
        else:
            _logger.warning("Ignoring out-of-range tagger span %s for %r", span, hypothesis)
    return queries
