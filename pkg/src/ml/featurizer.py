"""Hashed character-trigram features for sentences.

Text is lower-cased, stripped and whitespace-collapsed; every trigram of
consecutive characters is hashed with 64-bit FNV-1a over its UTF-8 bytes,
reduced modulo the bucket count F, counted, and the count vector is
L2-normalised.  Texts shorter than three characters are wrapped in the
boundary markers ``^`` and ``$`` so at least one trigram exists.

The hash and normalisation rules are frozen: they are part of the model and
index file contracts (see ``docs/file_formats.md``).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import numpy.typing as npt

from src.common.errors import RankvecUsageError

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

NGRAM = 3
BOUNDARY_START = "^"
BOUNDARY_END = "$"


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash of *data*."""
    h = FNV64_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def normalize_text(text: str) -> str:
    """Lower-case and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


def trigrams(text: str) -> list[str]:
    """Character trigrams of the normalised text, boundary-padded if short."""
    norm = normalize_text(text)
    if not norm:
        raise RankvecUsageError("sentence text is empty after whitespace trimming")
    if len(norm) < NGRAM:
        norm = f"{BOUNDARY_START}{norm}{BOUNDARY_END}"
    return [norm[i : i + NGRAM] for i in range(len(norm) - NGRAM + 1)]


@lru_cache(maxsize=65536)
def _bucket(gram: str, n_features: int) -> int:
    return fnv1a_64(gram.encode("utf-8")) % n_features


def featurize(text: str, n_features: int) -> npt.NDArray[np.float64]:
    """Return the unit-norm trigram bucket-count vector of length *n_features*."""
    if n_features < 1:
        raise RankvecUsageError(f"n_features must be positive, got {n_features}")
    buckets = np.fromiter(
        (_bucket(g, n_features) for g in trigrams(text)), dtype=np.int64
    )
    counts = np.bincount(buckets, minlength=n_features).astype(np.float64)
    return counts / np.linalg.norm(counts)


def featurize_batch(texts: list[str], n_features: int) -> npt.NDArray[np.float64]:
    """Stack :func:`featurize` over *texts* into an m×F matrix."""
    out = np.empty((len(texts), n_features), dtype=np.float64)
    for i, text in enumerate(texts):
        out[i] = featurize(text, n_features)
    return out
