"""Entity catalog ingestion and text normalization.

The catalog is the retrieval corpus: every entity gets a dense, stable integer
id at ingestion and is immutable afterwards.  Index keys are derived from the
normalized forms, so a catalog change means rebuilding every index.

Catalog file format (UTF-8, ``#`` starts a comment line)::

    The Weeknd                 # plain mode: one surface form per line
    0<TAB>The Weeknd           # TSV mode: explicit id
    0<TAB>The Weeknd<TAB>2.5   # TSV mode with a sampling weight

The mode is decided by the first content line.  In TSV mode the explicit ids
must be unique non-negative integers; they order ingestion (ascending), and
the stored ids are re-densified from 0 after deduplication.
"""

from __future__ import annotations

import logging
import re
import unicodedata
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

from hintfix.exceptions import EntityNotFoundError, IngestionError

_logger = logging.getLogger(__name__)

# Characters kept when attached to a preceding letter/digit ("guns n' roses", "jay-z").
_APOSTROPHES = frozenset("'’ʼ")
_HYPHENS = frozenset("-‐‑")

# Context markers are reserved: a surface form containing one could not be
# rendered unambiguously.
RESERVED_MARKERS: tuple[str, ...] = ("[H]", "[A]", "[P]")

_TSV_ID_RE = re.compile(r"^\d+$")


def normalize_text(raw: str) -> str:
    """Normalize text so query spans and catalog keys compare consistently.

    Lowercases, removes Unicode punctuation and symbols except apostrophes and
    hyphens attached to a preceding letter or digit, collapses whitespace to
    single spaces and trims.  Idempotent.

    Examples:
        >>> normalize_text("  Play  THE  Weeknd!! ")
        'play the weeknd'
        >>> normalize_text("Guns N' Roses")
        "guns n' roses"

    """
    text = unicodedata.normalize("NFKC", raw).lower()
    out: list[str] = []
    prev_alnum = False
    for ch in text:
        if ch.isalnum() or unicodedata.category(ch).startswith("M"):
            out.append(ch)
            prev_alnum = ch.isalnum() or prev_alnum
            continue
        if ch.isspace():
            out.append(" ")
        elif ch in _APOSTROPHES and prev_alnum:
            out.append("'")
        elif ch in _HYPHENS and prev_alnum:
            out.append("-")
        elif ch in _APOSTROPHES or ch in _HYPHENS:
            out.append(" ")
        prev_alnum = False
    return " ".join("".join(out).split())


@dataclass(frozen=True)
class Entity:
    """A catalog entry."""

    id: int
    surface: str
    normalized: str
    weight: float = 1.0


@dataclass(frozen=True)
class EntityCatalog:
    """Immutable, ordered entity list with a normalized-form lookup.

    Safe for concurrent reads; construct it with :func:`load_catalog` or
    :meth:`from_surfaces`.
    """

    entities: tuple[Entity, ...] = ()
    dedup_map: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def lookup(self, entity_id: int) -> Entity:
        """Return the entity with *entity_id*.

        Raises:
            EntityNotFoundError: If the id is not in the catalog.
        """
        if not 0 <= entity_id < len(self.entities):
            raise EntityNotFoundError(entity_id)
        return self.entities[entity_id]

    def find(self, text: str) -> Entity | None:
        """Return the entity whose normalized form equals ``normalize_text(text)``."""
        entity_id = self.dedup_map.get(normalize_text(text))
        return None if entity_id is None else self.entities[entity_id]

    @property
    def normalized_forms(self) -> list[str]:
        return [entity.normalized for entity in self.entities]

    @property
    def weights(self) -> list[float]:
        return [entity.weight for entity in self.entities]

    @classmethod
    def from_surfaces(
        cls,
        surfaces: Iterable[str],
        weights: Sequence[float] | None = None,
    ) -> EntityCatalog:
        """Build a catalog from surface forms, dropping normalization duplicates.

        First occurrence wins; surfaces that normalize to the empty string are
        skipped.
        """
        entities: list[Entity] = []
        dedup: dict[str, int] = {}
        for position, raw in enumerate(surfaces):
            surface = " ".join(raw.split())
            normalized = normalize_text(surface)
            if not normalized or normalized in dedup:
                continue
            weight = 1.0 if weights is None else float(weights[position])
            entity = Entity(
                id=len(entities), surface=surface, normalized=normalized, weight=weight
            )
            dedup[normalized] = entity.id
            entities.append(entity)
        return cls(entities=tuple(entities), dedup_map=dedup)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _decode_lines(source: Iterable[bytes | str]) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise IngestionError(f"invalid UTF-8 ({exc.reason})", line=number) from exc
        else:
            text = raw
        yield number, text.rstrip("\r\n")


def _check_reserved(surface: str, number: int) -> None:
    for marker in RESERVED_MARKERS:
        if marker in surface:
            raise IngestionError(f"surface form contains reserved marker {marker}", line=number)


def _parse_tsv_line(text: str, number: int) -> tuple[int, str, float]:
    parts = text.split("\t")
    if len(parts) not in (2, 3) or not _TSV_ID_RE.match(parts[0].strip()):
        raise IngestionError("expected 'id<TAB>surface[<TAB>weight]'", line=number)
    weight = 1.0
    if len(parts) == 3:
        try:
            weight = float(parts[2])
        except ValueError as exc:
            raise IngestionError(f"invalid weight {parts[2]!r}", line=number) from exc
        if not weight > 0:
            raise IngestionError(f"weight must be positive, got {weight}", line=number)
    return int(parts[0].strip()), parts[1], weight


def load_catalog(source: Iterable[bytes | str]) -> EntityCatalog:
    """Load a catalog from a line-oriented stream.

    Accepts an iterable of ``bytes`` lines (e.g. a file opened in binary mode,
    so malformed UTF-8 can be reported with its line number) or of ``str``.

    Returns:
        The deduplicated catalog; ids are assigned in ingestion order.

    Raises:
        IngestionError: On malformed UTF-8, malformed TSV lines, duplicate
            explicit ids, or reserved context markers in a surface form.

    """
    tsv_mode: bool | None = None
    plain: list[str] = []
    explicit: dict[int, tuple[str, float]] = {}

    for number, text in _decode_lines(source):
        if not text.strip() or text.lstrip().startswith("#"):
            continue
        if tsv_mode is None:
            tsv_mode = "\t" in text and bool(_TSV_ID_RE.match(text.split("\t", 1)[0].strip()))
        if tsv_mode:
            entity_id, surface, weight = _parse_tsv_line(text, number)
            if entity_id in explicit:
                raise IngestionError(f"duplicate id {entity_id}", line=number)
            _check_reserved(surface, number)
            explicit[entity_id] = (surface, weight)
        else:
            _check_reserved(text, number)
            plain.append(text)

    if tsv_mode:
        ordered = sorted(explicit.items())
        catalog = EntityCatalog.from_surfaces(
            [surface for _, (surface, _) in ordered],
            weights=[weight for _, (_, weight) in ordered],
        )
        read = len(ordered)
    else:
        catalog = EntityCatalog.from_surfaces(plain)
        read = len(plain)

    _logger.debug("Loaded catalog: %d lines, %d entities", read, len(catalog))
    return catalog


def load_catalog_file(path: Path) -> EntityCatalog:
    """Load a catalog from *path*.

    Raises:
        IngestionError: If the file cannot be read or is malformed.
    """
    try:
        handle: BinaryIO = path.open("rb")
    except OSError as exc:
        raise IngestionError(f"cannot read catalog file {path}: {exc.strerror}") from exc
    with handle:
        return load_catalog(handle)


def write_catalog(path: Path, catalog: EntityCatalog) -> None:
    """Write *catalog* in TSV mode (``id<TAB>surface<TAB>weight``)."""
    lines = [f"{e.id}\t{e.surface}\t{e.weight:g}" for e in catalog]
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
