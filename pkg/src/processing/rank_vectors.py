"""Rank vectors: corpus-anchored sentence representations.

A sentence's rank vector lists, for every corpus sentence, its rank by
similarity to the input (rank 1 = most similar, ties share the average of
the positions they span), centred and scaled by

    g(r) = (r - mean(r)) / (sqrt(n) * std(r))          (population std)

so that the inner product of two rank vectors equals Spearman's rank
correlation of the underlying score lists, ties included.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt
from scipy.stats import rankdata

from src.common.errors import RankvecDomainError, RankvecUsageError
from src.common.metrics import rank_vectors_total
from src.numerics.linalg import as_vector

if TYPE_CHECKING:
    from src.storage.corpus_index import CorpusIndex

RawRanks = npt.NDArray[np.float64]

# Rows handed to one worker when a batch is fanned out.
_CHUNK_ROWS = 8


@dataclass(frozen=True)
class RankVector:
    """Normalised rank vector of dimension n (the corpus size)."""

    values: npt.NDArray[np.float64] = field(repr=False)
    source_id: int | None = None

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


# ── scalar path ──────────────────────────────────────────────────────


def compute_ranks(scores: Sequence[float] | npt.NDArray[np.float64]) -> RawRanks:
    """Descending average ranks: the highest score gets rank 1."""
    arr = as_vector(scores, name="scores")
    if arr.size < 2:
        raise RankvecUsageError(f"ranking needs at least 2 scores, got {arr.size}")
    return rankdata(-arr, method="average").astype(np.float64)


def normalize(r: RawRanks | Sequence[float], *, source_id: int | None = None) -> RankVector:
    """Apply g: centre on the mean rank and scale to unit L2 norm."""
    ranks = as_vector(r, name="ranks")
    if ranks.size < 2:
        raise RankvecUsageError(f"normalisation needs at least 2 ranks, got {ranks.size}")
    return RankVector(values=_normalize_rows(ranks[None, :])[0], source_id=source_id)


def _normalize_rows(ranks: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    n = ranks.shape[1]
    mean = ranks.mean(axis=1, keepdims=True)
    centred = ranks - mean
    std = np.sqrt((centred**2).mean(axis=1, keepdims=True))
    degenerate = np.flatnonzero(std[:, 0] == 0.0)
    if degenerate.size:
        raise RankvecDomainError(f"degenerate rank vector (all ranks tied) at row {int(degenerate[0])}")
    return centred / (math.sqrt(n) * std)


def rank_similarity(u: RankVector | npt.NDArray[np.float64], v: RankVector | npt.NDArray[np.float64]) -> float:
    """Inner product of two rank vectors, clamped to [-1, 1]."""
    a = u.values if isinstance(u, RankVector) else np.asarray(u, dtype=np.float64)
    b = v.values if isinstance(v, RankVector) else np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise RankvecUsageError(f"rank vector dimension mismatch: {a.shape} vs {b.shape}")
    return min(1.0, max(-1.0, float(np.dot(a, b))))


def spearman_oracle(a: Sequence[float] | npt.NDArray[np.float64], b: Sequence[float] | npt.NDArray[np.float64]) -> float:
    """Spearman's rho as the Pearson correlation of average (ascending) ranks.

    Computed independently of :func:`normalize`; serves as the STS metric and
    as the reference the rank-vector inner product is checked against.
    """
    x = as_vector(a, name="a")
    y = as_vector(b, name="b")
    if x.size != y.size:
        raise RankvecUsageError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise RankvecUsageError("spearman needs at least 2 observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise RankvecDomainError("spearman undefined: constant input")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


# ── corpus-anchored path ─────────────────────────────────────────────


def rank_vector(index: CorpusIndex, e: npt.NDArray[np.float64]) -> RankVector:
    """Rank vector of *e*: every corpus sentence ranked by cosine to *e*."""
    return RankVector(values=rank_vectors(index, np.asarray(e, dtype=np.float64)[None, :])[0])


def rank_vectors(
    index: CorpusIndex,
    embeddings: npt.NDArray[np.float64],
    *,
    threads: int | None = 1,
) -> npt.NDArray[np.float64]:
    """Rank vectors of every row of an m×D batch, as an m×n matrix.

    Each row is computed independently, so fanning chunks out over a thread
    pool (``threads > 1``) yields the same matrix as the serial path.
    """
    batch = np.asarray(embeddings, dtype=np.float64)
    if batch.ndim != 2:
        raise RankvecUsageError(f"embedding batch must be 2-dimensional, got {batch.shape}")
    if batch.shape[1] != index.dim:
        raise RankvecUsageError(f"embedding dimension {batch.shape[1]} != index dimension {index.dim}")
    if index.size < 2:
        raise RankvecUsageError("rank vectors need an index with at least 2 sentences")

    def _chunk(start: int) -> npt.NDArray[np.float64]:
        rows = batch[start : start + _CHUNK_ROWS]
        scores = np.stack([index.scores(row) for row in rows])
        return _normalize_rows(rankdata(-scores, method="average", axis=1))

    starts = range(0, batch.shape[0], _CHUNK_ROWS)
    if threads is not None and threads > 1 and batch.shape[0] > _CHUNK_ROWS:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk, starts))
    else:
        parts = [_chunk(s) for s in starts]
    rank_vectors_total.inc(batch.shape[0])
    return np.vstack(parts)


def rank_similarity_matrix(u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """m×m inner products of rank vectors; exactly symmetric, clamped to [-1, 1]."""
    sims = u @ u.T
    return np.clip(0.5 * (sims + sims.T), -1.0, 1.0)
