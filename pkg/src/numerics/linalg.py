"""Dense vector / matrix primitives used by every other module.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64.
The ``as_vector`` / ``as_matrix`` helpers enforce the invariants (non-empty,
finite, correct rank) at public entry points and return read-only arrays so
callers cannot mutate shared state by accident.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from src.common.errors import RankvecDomainError, RankvecUsageError

DenseVector = npt.NDArray[np.float64]
DenseMatrix = npt.NDArray[np.float64]

ArrayLike = npt.ArrayLike | Sequence[float]


def _freeze(arr: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    arr.setflags(write=False)
    return arr


def as_vector(values: ArrayLike, *, name: str = "vector") -> DenseVector:
    """Validate *values* as a finite, non-empty 1-D float64 vector."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise RankvecUsageError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise RankvecUsageError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise RankvecUsageError(f"{name} contains non-finite values")
    return _freeze(arr)


def as_matrix(values: ArrayLike, *, name: str = "matrix") -> DenseMatrix:
    """Validate *values* as a finite 2-D float64 matrix with positive shape."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise RankvecUsageError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise RankvecUsageError(f"{name} must have positive rows and cols, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RankvecUsageError(f"{name} contains non-finite values")
    return _freeze(arr)


def cosine(a: ArrayLike, b: ArrayLike) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1].

    Raises :class:`RankvecUsageError` on dimension mismatch and
    :class:`RankvecDomainError` when either input has zero norm.
    """
    va = as_vector(a, name="a")
    vb = as_vector(b, name="b")
    if va.shape != vb.shape:
        raise RankvecUsageError(f"dimension mismatch: {va.size} vs {vb.size}")
    na = math.sqrt(float(np.dot(va, va)))
    nb = math.sqrt(float(np.dot(vb, vb)))
    if na == 0.0 or nb == 0.0:
        raise RankvecDomainError("cosine undefined for zero-norm vector")
    # (a.b)/(|a||b|) computed with the product in the denominator keeps the
    # expression symmetric in (a, b) bit-for-bit.
    value = float(np.dot(va, vb)) / (na * nb)
    return min(1.0, max(-1.0, value))


def mean_std(v: ArrayLike) -> tuple[float, float]:
    """Arithmetic mean and population (1/n) standard deviation."""
    arr = as_vector(v)
    mean = float(np.mean(arr))
    std = float(np.sqrt(np.mean((arr - mean) ** 2)))
    return mean, std


def matmul(a: ArrayLike, b: ArrayLike) -> DenseMatrix:
    """Matrix product ``a @ b`` with a shape check."""
    ma = as_matrix(a, name="A")
    mb = as_matrix(b, name="B")
    if ma.shape[1] != mb.shape[0]:
        raise RankvecUsageError(f"shape mismatch: {ma.shape} x {mb.shape}")
    return _freeze(np.matmul(ma, mb))


# ── batched helpers ──────────────────────────────────────────────────


def row_norms(m: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """L2 norm of every row."""
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def normalize_rows(
    m: npt.NDArray[np.float64], *, what: str = "embedding"
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Return ``(unit_rows, norms)``; any zero-norm row is a domain error."""
    norms = row_norms(m)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise RankvecDomainError(f"zero-norm {what} at row {int(zero[0])}")
    return m / norms[:, None], norms


def cosine_matrix(a: npt.NDArray[np.float64], b: npt.NDArray[np.float64]) -> DenseMatrix:
    """Pairwise cosine between rows of *a* (m×D) and rows of *b* (k×D), clamped."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise RankvecUsageError(f"shape mismatch: {a.shape} vs {b.shape}")
    ua, _ = normalize_rows(a)
    ub, _ = normalize_rows(b)
    return np.clip(ua @ ub.T, -1.0, 1.0)
