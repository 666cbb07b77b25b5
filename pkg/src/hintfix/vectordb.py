"""Exact nearest-neighbor search over dense entity keys, plus a BM25 retriever.

Both retrievers return :class:`RetrievedEntity` lists sorted by ascending
distance with ties broken by ascending entity id.  Dense distances are
Euclidean (computed in float64 even though keys are stored as float32).
Sparse results carry the pseudo-distance ``1 / (1 + score)``; the D_max
threshold is a Euclidean cutoff and is never applied to them.

Index file format (little-endian)::

    magic   4 bytes  b"ANIX"
    version u32      1
    rows    u64
    dim     u32      40
    keys    rows * dim float32, row-major
    ids     rows u64
"""

from __future__ import annotations

import logging
import math
import struct
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Protocol

import numpy as np
from numpy.typing import NDArray

from hintfix.bm25 import Bm25Index, bm25_scores
from hintfix.catalog import EntityCatalog
from hintfix.encoders import DIM, DenseEmbedding, Encoder, encode_dense
from hintfix.exceptions import EncodingError, IndexFormatError
from hintfix.querygen import Query

_logger = logging.getLogger(__name__)

INDEX_MAGIC = b"ANIX"
INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


class RetrievalKind(StrEnum):
    """How a :class:`RetrievedEntity` distance was produced."""

    DENSE = "dense"
    BM25 = "bm25"


@dataclass(frozen=True)
class RetrievedEntity:
    """An (entity, distance, source query) triple."""

    entity_id: int
    distance: float
    source_query: Query
    kind: RetrievalKind = RetrievalKind.DENSE

    @property
    def sort_key(self) -> tuple[float, int]:
        return (self.distance, self.entity_id)


@dataclass(frozen=True)
class Neighbor:
    """A kNN hit before it is attributed to a query."""

    entity_id: int
    distance: float


# ---------------------------------------------------------------------------
# Dense index
# ---------------------------------------------------------------------------


class EmbeddingIndex:
    """N x 40 float32 key matrix plus the row -> entity id table.

    Immutable after build; concurrent queries are safe.
    """

    def __init__(self, keys: NDArray[np.float32], ids: NDArray[np.uint64]) -> None:
        if keys.ndim != 2 or keys.shape[1] != DIM:
            raise IndexFormatError(f"Expected an N x {DIM} key matrix, got {keys.shape}")
        if ids.shape != (keys.shape[0],):
            raise IndexFormatError("Id table length does not match key rows")
        self.keys = keys
        self.ids = ids
        self.keys.setflags(write=False)
        self.ids.setflags(write=False)
        self.keys64: NDArray[np.float64] = keys.astype(np.float64)
        self.ids64: NDArray[np.int64] = ids.astype(np.int64)

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def distances(self, query_vec: DenseEmbedding) -> NDArray[np.float64]:
        """Euclidean distance from *query_vec* to every key, in float64."""
        diff = self.keys64 - np.asarray(query_vec, dtype=np.float64)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def build_index(catalog: EntityCatalog, encoder: Encoder = encode_dense) -> EmbeddingIndex:
    """Encode every catalog entity into one key row (row i = entity i).

    Index files only ever hold :func:`~hintfix.encoders.encode_dense` keys;
    other encoders are for indices built in memory.

    Raises:
        EncodingError: If the catalog is empty.
    """
    if len(catalog) == 0:
        raise EncodingError("Cannot build an embedding index over an empty catalog")
    keys = np.empty((len(catalog), DIM), dtype=np.float32)
    for entity in catalog:
        keys[entity.id] = encoder(entity.normalized)
    ids = np.arange(len(catalog), dtype=np.uint64)
    _logger.debug("Built embedding index with %d rows", len(catalog))
    return EmbeddingIndex(keys=keys, ids=ids)


def _select(
    distances: NDArray[np.float64],
    ids: NDArray[np.int64],
    rows: NDArray[np.intp],
    k: int,
) -> list[Neighbor]:
    """Pick the k smallest (distance, id) among *rows*, exactly."""
    if rows.size > k:
        part = np.argpartition(distances[rows], k - 1)[:k]
        kth = distances[rows][part].max()
        # keep every tie at the boundary so the id tie-break stays exact
        rows = rows[distances[rows] <= kth]
    order = np.lexsort((ids[rows], distances[rows]))[:k]
    chosen = rows[order]
    return [Neighbor(int(ids[row]), float(distances[row])) for row in chosen]


def knn(
    index: EmbeddingIndex,
    query_vec: DenseEmbedding,
    k: int,
    d_max: float,
) -> list[Neighbor]:
    """Exact k nearest neighbors within Euclidean distance *d_max*.

    Results are sorted by ascending distance, ties by ascending entity id.
    An empty list is a valid result.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distances = index.distances(query_vec)
    rows = np.flatnonzero(distances <= d_max)
    if rows.size == 0:
        return []
    return _select(distances, index.ids64, rows, k)


def knn_batch(
    index: EmbeddingIndex,
    query_vecs: Sequence[DenseEmbedding],
    k: int,
    d_max: float,
    *,
    workers: int | None = None,
) -> list[list[Neighbor]]:
    """Run :func:`knn` for many queries; identical to sequential execution."""
    if workers == 1 or len(query_vecs) <= 1:
        return [knn(index, vec, k, d_max) for vec in query_vecs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda vec: knn(index, vec, k, d_max), query_vecs))


# ---------------------------------------------------------------------------
# Optional clustered (approximate) probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClusteredIndex:
    """Coarse quantizer over an :class:`EmbeddingIndex`.

    APPROXIMATE: keys are partitioned into about sqrt(N) clusters by a seeded
    k-means and a query only scans the *probe* nearest clusters.  Results can
    miss true neighbors; the exact :func:`knn` stays the default path.
    """

    index: EmbeddingIndex
    centroids: NDArray[np.float64]
    assignments: NDArray[np.intp]

    @classmethod
    def build(
        cls,
        index: EmbeddingIndex,
        *,
        n_clusters: int | None = None,
        iterations: int = 10,
        seed: int = 0,
    ) -> ClusteredIndex:
        keys = index.keys64
        count = n_clusters or max(1, math.isqrt(len(index)))
        count = min(count, len(index))
        rng = np.random.default_rng(seed)
        centroids = keys[rng.choice(len(index), size=count, replace=False)].copy()
        assignments = np.zeros(len(index), dtype=np.intp)
        key_norms = np.einsum("ij,ij->i", keys, keys)[:, None]
        for _ in range(iterations):
            # squared distances without materializing an N x C x DIM tensor
            dists = key_norms - 2 * keys @ centroids.T + (centroids**2).sum(axis=1)[None, :]
            assignments = np.argmin(dists, axis=1)
            for c in range(count):
                members = keys[assignments == c]
                if len(members):
                    centroids[c] = members.mean(axis=0)
        return cls(index=index, centroids=centroids, assignments=assignments)

    def search(
        self,
        query_vec: DenseEmbedding,
        k: int,
        d_max: float,
        *,
        probe: int,
    ) -> list[Neighbor]:
        """Approximate kNN scanning only the *probe* nearest clusters."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        q = np.asarray(query_vec, dtype=np.float64)
        centroid_d = np.linalg.norm(self.centroids - q, axis=1)
        nearest = np.argsort(centroid_d, kind="stable")[:probe]
        rows = np.flatnonzero(np.isin(self.assignments, nearest))
        distances = self.index.distances(q)
        rows = rows[distances[rows] <= d_max]
        if rows.size == 0:
            return []
        return _select(distances, self.index.ids64, rows, k)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def index_to_bytes(index: EmbeddingIndex) -> bytes:
    header = _HEADER.pack(INDEX_MAGIC, INDEX_VERSION, len(index), DIM)
    keys = np.ascontiguousarray(index.keys, dtype="<f4").tobytes()
    ids = np.ascontiguousarray(index.ids, dtype="<u8").tobytes()
    return header + keys + ids


def index_from_bytes(data: bytes) -> EmbeddingIndex:
    """Parse the flat binary index format.

    Raises:
        IndexFormatError: On a bad header or a size mismatch.
    """
    if len(data) < _HEADER.size:
        raise IndexFormatError("Index file is truncated (no header)")
    magic, version, rows, dim = _HEADER.unpack_from(data)
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"Bad magic {magic!r}, expected {INDEX_MAGIC!r}")
    if version != INDEX_VERSION:
        raise IndexFormatError(f"Unsupported index version {version}")
    if dim != DIM:
        raise IndexFormatError(f"Unsupported dimension {dim}, expected {DIM}")
    key_bytes = rows * dim * 4
    expected = _HEADER.size + key_bytes + rows * 8
    if len(data) != expected:
        raise IndexFormatError(f"Index file has {len(data)} bytes, expected {expected}")
    keys = np.frombuffer(data, dtype="<f4", count=rows * dim, offset=_HEADER.size)
    ids = np.frombuffer(data, dtype="<u8", count=rows, offset=_HEADER.size + key_bytes)
    return EmbeddingIndex(
        keys=keys.astype(np.float32).reshape(rows, dim),
        ids=ids.astype(np.uint64),
    )


def save_index(index: EmbeddingIndex, path: Path) -> None:
    path.write_bytes(index_to_bytes(index))


def load_index(path: Path) -> EmbeddingIndex:
    """Read an index written by :func:`save_index`.

    Raises:
        IndexFormatError: If the file is unreadable or malformed.
    """
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IndexFormatError(f"Cannot read index file {path}: {exc.strerror}") from exc
    return index_from_bytes(data)


# ---------------------------------------------------------------------------
# Sparse top-k
# ---------------------------------------------------------------------------


def bm25_topk(index: Bm25Index, query: Query, k: int) -> list[RetrievedEntity]:
    """Top-k entities by descending BM25 score, zero scores excluded.

    Scores become pseudo-distances ``1 / (1 + score)`` so the shared
    ascending-distance contract holds; ties break by ascending entity id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = bm25_scores(index, query.text)
    ranked = sorted(
        ((entity_id, score) for entity_id, score in scores.items() if score > 0),
        key=lambda item: (-item[1], item[0]),
    )[:k]
    return [
        RetrievedEntity(
            entity_id=entity_id,
            distance=1.0 / (1.0 + score),
            source_query=query,
            kind=RetrievalKind.BM25,
        )
        for entity_id, score in ranked
    ]


# ---------------------------------------------------------------------------
# Retrievers (shared contract)
# ---------------------------------------------------------------------------


class Retriever(Protocol):
    """Anything that maps a query to a sorted candidate list."""

    def retrieve(self, query: Query, k: int) -> list[RetrievedEntity]: ...


class DenseRetriever:
    """Embedding retriever (exact by default).

    *encoder* must be the one *index* was built with.  Hits carry
    :attr:`RetrievalKind.DENSE` whichever encoder is used, since their
    distances share the same Euclidean scale.
    """

    def __init__(
        self,
        index: EmbeddingIndex,
        *,
        d_max: float,
        encoder: Encoder = encode_dense,
        clustered: ClusteredIndex | None = None,
        probe: int | None = None,
    ) -> None:
        self.index = index
        self.d_max = d_max
        self.encoder = encoder
        self._clustered = clustered
        self._probe = probe

    def retrieve(self, query: Query, k: int) -> list[RetrievedEntity]:
        vec = self.encoder(query.text)
        if self._clustered is not None and self._probe is not None:
            hits = self._clustered.search(vec, k, self.d_max, probe=self._probe)
        else:
            hits = knn(self.index, vec, k, self.d_max)
        return [
            RetrievedEntity(hit.entity_id, hit.distance, query, RetrievalKind.DENSE)
            for hit in hits
        ]


class Bm25Retriever:
    """Okapi BM25 retriever; D_max does not apply."""

    def __init__(self, index: Bm25Index) -> None:
        self.index = index

    def retrieve(self, query: Query, k: int) -> list[RetrievedEntity]:
        return bm25_topk(self.index, query, k)


def retrieve_grouped(
    retriever: Retriever,
    queries: Sequence[Query],
    k: int,
) -> list[list[RetrievedEntity]]:
    """Top-k per query, in query order.

    A query whose text cannot be encoded (no letters or digits) retrieves
    nothing.
    """
    groups: list[list[RetrievedEntity]] = []
    for query in queries:
        try:
            groups.append(retriever.retrieve(query, k))
        except EncodingError as exc:
            _logger.debug("Skipping query %r: %s", query.text, exc)
            groups.append([])
    return groups
