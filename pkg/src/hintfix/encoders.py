"""Deterministic phonetic-proxy dense embeddings.

:func:`encode_dense` stands in for a trained acoustic word encoder: it keeps
the interface (40-dimensional unit vectors compared by Euclidean distance)
and the key property that acoustically confusable strings land close
together, with no training.

Features (a multiset, each hashed to one signed dimension):

- ``c:<gram>`` character 2- and 3-grams of the orthography, spaces replaced
  by the word-boundary marker ``#`` and the string wrapped in ``#``;
  weight :data:`CHAR_WEIGHT`.
- ``p1:<code>`` / ``p2:<code><code>`` phonetic code unigrams and bigrams
  (see :mod:`hintfix.phonetics`); weight :data:`CODE_WEIGHT`.

:func:`encode_phonetic` is the pronunciation-only variant: it keeps just the
phonetic codes, as 1- to 3-grams over the code sequence padded with ``#``, so
spellings with equal codes encode identically.

Hashing: 64-bit keyed BLAKE2b with the fixed key :data:`HASH_SEED`; the
bucket is the digest (little-endian unsigned) modulo :data:`DIM` and the
sign is taken from its top bit.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from collections.abc import Callable
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from hintfix.exceptions import EncodingError
from hintfix.phonetics import phonetic_codes

DIM = 40
HASH_SEED = 0x68696E7466697831  # "hintfix1"
CHAR_WEIGHT = 1.0
CODE_WEIGHT = 2.0
CHAR_NGRAM_SIZES = (2, 3)
PHONETIC_NGRAM_SIZES = (1, 2, 3)

DenseEmbedding = NDArray[np.float64]
Encoder = Callable[[str], DenseEmbedding]

_HASH_KEY = HASH_SEED.to_bytes(8, "little")
_SIGN_BIT = 1 << 63


@lru_cache(maxsize=1 << 16)
def _bucket(feature: str) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    value = int.from_bytes(digest, "little")
    return value % DIM, (-1.0 if value & _SIGN_BIT else 1.0)


def dense_features(text: str) -> Counter[str]:
    """Return the weighted-feature multiset of *text* (before hashing).

    Raises:
        EncodingError: If *text* is empty or has no letters or digits.
    """
    if not text:
        raise EncodingError("Cannot encode empty text")
    features: Counter[str] = Counter()
    marked = "#" + text.replace(" ", "#") + "#"
    for n in CHAR_NGRAM_SIZES:
        for i in range(len(marked) - n + 1):
            features["c:" + marked[i : i + n]] += 1
    codes = phonetic_codes(text)
    for code in codes:
        features["p1:" + code] += 1
    for left, right in zip(codes, codes[1:], strict=False):
        features["p2:" + left + right] += 1
    return features


def _project(text: str, features: Counter[str]) -> DenseEmbedding:
    vector = np.zeros(DIM, dtype=np.float64)
    for feature, count in sorted(features.items()):
        bucket, sign = _bucket(feature)
        weight = CODE_WEIGHT if feature.startswith("p") else CHAR_WEIGHT
        vector[bucket] += sign * weight * count
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise EncodingError(f"Features of {text!r} cancelled to a zero vector")
    vector /= norm
    vector.setflags(write=False)
    return vector


@lru_cache(maxsize=1 << 15)
def _encode_cached(text: str) -> DenseEmbedding:
    return _project(text, dense_features(text))


def encode_dense(text: str) -> DenseEmbedding:
    """Encode normalized *text* as a 40-dim unit vector.

    Deterministic and thread-safe; equal inputs give bitwise-equal outputs.
    The returned array is read-only (results are memoized).

    Raises:
        EncodingError: If *text* is empty, has no letters or digits, or its
            hashed features cancel out exactly.
    """
    return _encode_cached(text)


def dense_distance(a: str, b: str) -> float:
    """Euclidean distance between the dense encodings of two strings."""
    return float(np.linalg.norm(encode_dense(a) - encode_dense(b)))


def phonetic_features(text: str) -> Counter[str]:
    """Return the code n-gram multiset used by :func:`encode_phonetic`.

    Raises:
        EncodingError: If *text* has no letters or digits.
    """
    padded = ("#", *phonetic_codes(text), "#")
    features: Counter[str] = Counter()
    for n in PHONETIC_NGRAM_SIZES:
        for i in range(len(padded) - n + 1):
            features[f"p{n}:" + "".join(padded[i : i + n])] += 1
    del features["p1:#"]
    return features


@lru_cache(maxsize=1 << 15)
def _encode_phonetic_cached(text: str) -> DenseEmbedding:
    return _project(text, phonetic_features(text))


def encode_phonetic(text: str) -> DenseEmbedding:
    """Encode normalized *text* from its phonetic codes alone.

    Same space and guarantees as :func:`encode_dense`; "nite" and "night"
    map to the same vector.
    """
    return _encode_phonetic_cached(text)
