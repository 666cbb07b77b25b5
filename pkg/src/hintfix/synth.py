"""Synthetic evaluation data: templated entity queries with ASR-like errors.

Records are built by dropping a catalog entity into a carrier phrase
(``"play {entity}"``) and, with probability ``p_err``, respelling the entity
span the way a recognizer might mishear it.  Everything is driven by one
seeded :class:`random.Random`, so a (catalog, carriers, n, model) tuple
always yields the same records.

EvalRecord file: JSON Lines, one object per line::

    {"id": "syn-42-000000", "reference": "play the weeknd",
     "hypothesis": "play the weekend", "gold_entity_id": 17,
     "gold_span": [1, 3], "subset": "synthetic"}

Homophone lexicon: UTF-8 TSV ``from<TAB>to``, ``#`` comment lines.
"""

from __future__ import annotations

import logging
import random
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from hintfix.catalog import EntityCatalog, normalize_text
from hintfix.exceptions import ConfigurationError, DataError, RecordFormatError

_logger = logging.getLogger(__name__)

ENTITY_SLOT = "{entity}"
MAX_CORRUPTION_ATTEMPTS = 10

#: Carrier phrases; each one is matched by a default query template.
DEFAULT_CARRIERS: tuple[str, ...] = (
    "play {entity}",
    "put on {entity}",
    "i want to hear {entity}",
    "shuffle {entity}",
    "queue up {entity}",
    "can you play {entity}",
    "listen to {entity}",
)


class CorruptionOp(StrEnum):
    VOWEL_SWAP = "vowel_swap"
    DOUBLE_OR_UNDOUBLE = "double_or_undouble_letter"
    HOMOPHONE_MAP = "homophone_map"
    CONSONANT_CLASS_SWAP = "adjacent_consonant_class_swap"
    WORD_SPLIT_OR_MERGE = "word_split_or_merge"


DEFAULT_OP_WEIGHTS: dict[CorruptionOp, float] = {
    CorruptionOp.VOWEL_SWAP: 0.25,
    CorruptionOp.DOUBLE_OR_UNDOUBLE: 0.20,
    CorruptionOp.HOMOPHONE_MAP: 0.20,
    CorruptionOp.CONSONANT_CLASS_SWAP: 0.20,
    CorruptionOp.WORD_SPLIT_OR_MERGE: 0.15,
}

_VOWELS = "aeiou"
_INSERTED_VOWELS = "ea"

# Spelling pairs that sound alike; applied in both directions.
_SPELLING_PAIRS: tuple[tuple[str, str], ...] = (
    ("ph", "f"),
    ("ck", "k"),
    ("c", "k"),
    ("s", "z"),
    ("ight", "ite"),
    ("ee", "ea"),
    ("oo", "u"),
    ("y", "ie"),
    ("x", "ks"),
    ("qu", "kw"),
    ("wh", "w"),
)

# Consonants a recognizer confuses with their neighbors in place or manner.
_CONSONANT_NEIGHBORS: dict[str, str] = {
    "b": "pv",
    "p": "bf",
    "v": "bf",
    "f": "vp",
    "d": "t",
    "t": "d",
    "g": "k",
    "k": "gc",
    "c": "k",
    "s": "z",
    "z": "s",
    "m": "n",
    "n": "m",
    "l": "r",
    "r": "l",
}

Lexicon = Mapping[str, tuple[str, ...]]


@dataclass(frozen=True, eq=False)
class CorruptionModel:
    """Parameters of the textual error simulator.

    Raises:
        ConfigurationError: If ``p_err`` is outside ``[0, 1]``, a weight is not
            positive, or the weights do not sum to 1.
    """

    p_err: float = 0.5
    op_weights: Mapping[CorruptionOp, float] = field(
        default_factory=lambda: dict(DEFAULT_OP_WEIGHTS)
    )
    seed: int = 0
    homophones: Lexicon = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_err <= 1.0:
            raise ConfigurationError(f"p_err must be within [0, 1], got {self.p_err}")
        if not self.op_weights:
            raise ConfigurationError("At least one corruption op is required")
        if any(not w > 0 for w in self.op_weights.values()):
            raise ConfigurationError("Corruption op weights must be positive")
        total = sum(self.op_weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"Corruption op weights must sum to 1, got {total}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


# ---------------------------------------------------------------------------
# Single-op variants
# ---------------------------------------------------------------------------


def _is_consonant(ch: str) -> bool:
    return ch.isalpha() and ch not in _VOWELS


def _vowel_variants(text: str) -> Iterator[str]:
    for i, ch in enumerate(text):
        if ch in _VOWELS:
            for other in _VOWELS:
                if other != ch:
                    yield text[:i] + other + text[i + 1 :]
            if 0 < i < len(text) - 1 and text[i - 1].isalpha() and text[i + 1].isalpha():
                yield text[:i] + text[i + 1 :]
        if i + 1 < len(text) and _is_consonant(ch) and _is_consonant(text[i + 1]):
            for vowel in _INSERTED_VOWELS:
                yield text[: i + 1] + vowel + text[i + 1 :]


def _doubling_variants(text: str) -> Iterator[str]:
    for i, ch in enumerate(text):
        if not ch.isalnum():
            continue
        if i + 1 < len(text) and text[i + 1] == ch:
            yield text[:i] + text[i + 1 :]
        elif i == 0 or text[i - 1] != ch:
            yield text[: i + 1] + ch + text[i + 1 :]


def _replace_each(text: str, old: str, new: str) -> Iterator[str]:
    start = text.find(old)
    while start >= 0:
        yield text[:start] + new + text[start + len(old) :]
        start = text.find(old, start + 1)


def _homophone_variants(text: str, lexicon: Lexicon) -> Iterator[str]:
    for left, right in _SPELLING_PAIRS:
        yield from _replace_each(text, left, right)
        yield from _replace_each(text, right, left)
    tokens = text.split()
    for start in range(len(tokens)):
        for end in range(start + 1, len(tokens) + 1):
            for target in lexicon.get(" ".join(tokens[start:end]), ()):
                yield " ".join([*tokens[:start], target, *tokens[end:]])


def _consonant_variants(text: str) -> Iterator[str]:
    for i, ch in enumerate(text):
        for other in _CONSONANT_NEIGHBORS.get(ch, ""):
            yield text[:i] + other + text[i + 1 :]


def _split_merge_variants(text: str) -> Iterator[str]:
    for i, ch in enumerate(text):
        if ch == " ":
            yield text[:i] + text[i + 1 :]
    offset = 0
    for token in text.split(" "):
        for cut in range(2, len(token) - 1):
            at = offset + cut
            yield text[:at] + " " + text[at:]
        offset += len(token) + 1


def corruption_variants(
    text: str,
    op: CorruptionOp,
    lexicon: Lexicon | None = None,
) -> list[str]:
    """Every distinct string one application of *op* can turn *text* into.

    Outputs are normalized; empty results and *text* itself are excluded.
    The list is sorted, so sampling from it is reproducible.
    """
    if op is CorruptionOp.VOWEL_SWAP:
        raw: Iterable[str] = _vowel_variants(text)
    elif op is CorruptionOp.DOUBLE_OR_UNDOUBLE:
        raw = _doubling_variants(text)
    elif op is CorruptionOp.HOMOPHONE_MAP:
        raw = _homophone_variants(text, lexicon or {})
    elif op is CorruptionOp.CONSONANT_CLASS_SWAP:
        raw = _consonant_variants(text)
    else:
        raw = _split_merge_variants(text)
    variants = {normalize_text(candidate) for candidate in raw}
    variants.discard("")
    variants.discard(text)
    return sorted(variants)


# ---------------------------------------------------------------------------
# Span corruption
# ---------------------------------------------------------------------------


class CorruptedSpan(NamedTuple):
    text: str
    uncorrupted: bool


def _apply_random_op(text: str, model: CorruptionModel, rng: random.Random) -> str:
    options = {
        op: corruption_variants(text, op, model.homophones) for op in model.op_weights
    }
    applicable = [op for op, variants in options.items() if variants]
    if not applicable:
        return text
    op = rng.choices(applicable, weights=[model.op_weights[op] for op in applicable])[0]
    return rng.choice(options[op])


def corrupt_span(text: str, model: CorruptionModel, rng: random.Random) -> CorruptedSpan:
    """Respell *text* with one or two sampled corruption ops.

    Only ops that can change the current string are sampled.  A draw that
    ends where it started is retried up to :data:`MAX_CORRUPTION_ATTEMPTS`
    times; after that *text* is returned flagged as uncorrupted.
    """
    if not text:
        raise ValueError("Cannot corrupt an empty span")
    for _ in range(MAX_CORRUPTION_ATTEMPTS):
        current = text
        for _ in range(rng.randint(1, 2)):
            current = _apply_random_op(current, model, rng)
        if current != text:
            return CorruptedSpan(current, uncorrupted=False)
    _logger.warning("Left %r uncorrupted after %d attempts", text, MAX_CORRUPTION_ATTEMPTS)
    return CorruptedSpan(text, uncorrupted=True)


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


class EvalRecord(BaseModel):
    """One evaluation utterance: reference, hypothesis and gold entity.

    *error* is set by ``hintfix correct --records`` when a remote backend
    failed and the hypothesis was passed through unchanged.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    reference: str
    hypothesis: str
    gold_entity_id: int | None = None
    gold_span: tuple[int, int] | None = None
    subset: str = "synthetic"
    error: str | None = None

    @model_validator(mode="after")
    def _check_gold_span(self) -> EvalRecord:
        if self.gold_span is not None:
            start, end = self.gold_span
            if not 0 <= start < end <= len(self.reference.split()):
                raise ValueError(f"gold_span {self.gold_span} is outside the reference")
        return self

    @property
    def has_gold(self) -> bool:
        return self.gold_entity_id is not None


def iter_records(lines: Iterable[str]) -> Iterator[EvalRecord]:
    """Parse JSON Lines into records; blank lines are skipped.

    Raises:
        RecordFormatError: On a line that is not a valid record.
    """
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield EvalRecord.model_validate_json(line)
        except ValidationError as exc:
            errors = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'record'}: {err['msg']}"
                for err in exc.errors()
            )
            raise RecordFormatError(errors, line=number) from exc


def read_records(path: Path) -> list[EvalRecord]:
    """Read an EvalRecord file.

    Raises:
        DataError: If the file cannot be read.
        RecordFormatError: On a malformed line.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot read record file {path}: {exc}") from exc
    return list(iter_records(text.splitlines()))


def write_records(path: Path, records: Iterable[EvalRecord]) -> int:
    """Write records as JSON Lines; returns the number written.

    Unset optional fields are omitted.
    """
    lines = [record.model_dump_json(exclude_none=True) for record in records]
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return len(lines)


def _split_carrier(carrier: str) -> tuple[list[str], list[str]]:
    if carrier.count(ENTITY_SLOT) != 1:
        raise ConfigurationError(
            f"Carrier {carrier!r} must contain exactly one {ENTITY_SLOT} slot"
        )
    prefix, suffix = carrier.split(ENTITY_SLOT)
    return normalize_text(prefix).split(), normalize_text(suffix).split()


def generate_records(
    catalog: EntityCatalog,
    carriers: Sequence[str],
    n: int,
    model: CorruptionModel,
    *,
    subset: str = "synthetic",
) -> list[EvalRecord]:
    """Instantiate *n* seeded records from carriers and catalog entities.

    Entities are sampled in proportion to their catalog weight.  With
    probability ``model.p_err`` the entity span of the hypothesis is
    corrupted; tokens outside the gold span are never touched.

    Raises:
        ConfigurationError: If a carrier lacks the ``{entity}`` slot, there
            are no carriers, the catalog is empty or *n* < 1.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if not carriers:
        raise ConfigurationError("At least one carrier phrase is required")
    if len(catalog) == 0:
        raise ConfigurationError("Cannot generate records from an empty catalog")
    parsed = [_split_carrier(carrier) for carrier in carriers]

    rng = random.Random(model.seed)
    entities = list(catalog)
    weights = catalog.weights
    records: list[EvalRecord] = []
    flagged = 0
    for i in range(n):
        prefix, suffix = rng.choice(parsed)
        entity = rng.choices(entities, weights=weights)[0]
        entity_tokens = entity.normalized.split()
        reference = [*prefix, *entity_tokens, *suffix]
        hypothesis = reference
        if rng.random() < model.p_err:
            corrupted = corrupt_span(entity.normalized, model, rng)
            flagged += corrupted.uncorrupted
            hypothesis = [*prefix, *corrupted.text.split(), *suffix]
        records.append(
            EvalRecord(
                id=f"syn-{model.seed}-{i:06d}",
                reference=" ".join(reference),
                hypothesis=" ".join(hypothesis),
                gold_entity_id=entity.id,
                gold_span=(len(prefix), len(prefix) + len(entity_tokens)),
                subset=subset,
            )
        )
    _logger.info("Generated %d records (%d left uncorrupted by the error model)", n, flagged)
    return records


# ---------------------------------------------------------------------------
# Catalog synthesis
# ---------------------------------------------------------------------------

_ONSETS = (
    "b", "br", "d", "dr", "f", "g", "k", "kr", "l", "m", "n", "p", "r", "s", "st", "t", "v", "z",
)  # fmt: skip
_NUCLEI = ("a", "e", "i", "o", "u", "ai", "ou")
_CODAS = ("", "", "", "n", "r", "l", "s", "x", "m")
_COMMON_WORDS = (
    "nights",
    "love",
    "dreams",
    "fire",
    "river",
    "lights",
    "heart",
    "city",
    "stars",
    "road",
)


def _pseudo_word(rng: random.Random) -> str:
    syllables = rng.randint(2, 3)
    return "".join(
        rng.choice(_ONSETS) + rng.choice(_NUCLEI) + rng.choice(_CODAS) for _ in range(syllables)
    )


def _pseudo_name(rng: random.Random) -> str:
    shape = rng.random()
    if shape < 0.40:
        words = [_pseudo_word(rng)]
    elif shape < 0.60:
        words = ["the", _pseudo_word(rng)]
    elif shape < 0.85:
        words = [_pseudo_word(rng), _pseudo_word(rng)]
    else:
        words = [_pseudo_word(rng), rng.choice(_COMMON_WORDS)]
    return " ".join(word.capitalize() for word in words)


def generate_catalog(n: int, seed: int = 0) -> EntityCatalog:
    """A reproducible catalog of *n* distinct pseudo artist/album names."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = random.Random(seed)
    surfaces: dict[str, str] = {}
    while len(surfaces) < n:
        surface = _pseudo_name(rng)
        surfaces.setdefault(normalize_text(surface), surface)
    return EntityCatalog.from_surfaces(surfaces.values())


def load_homophones(path: Path) -> dict[str, tuple[str, ...]]:
    """Read a ``from<TAB>to`` lexicon; both sides are normalized.

    Raises:
        DataError: If the file cannot be read or a line is malformed.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot read homophone lexicon {path}: {exc}") from exc
    lexicon: dict[str, list[str]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        source = normalize_text(parts[0]) if len(parts) == 2 else ""
        target = normalize_text(parts[1]) if len(parts) == 2 else ""
        if not source or not target:
            raise DataError(f"{path}: line {number}: expected 'from<TAB>to'")
        targets = lexicon.setdefault(source, [])
        if target != source and target not in targets:
            targets.append(target)
    return {source: tuple(targets) for source, targets in lexicon.items() if targets}
