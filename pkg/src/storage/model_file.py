"""Persistence of trained encoder parameters.

Layout::

    b"RKM1" | u32 D | u32 F | u64 seed | D*F float64, little-endian, row-major

Weights are stored at full precision so a retrained encoder reloads
bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import structlog

from src.common.errors import RankvecDataError
from src.ml.encoders import EncoderParams

logger = structlog.get_logger(__name__)

MODEL_MAGIC = b"RKM1"
_HEADER = struct.Struct("<4sIIQ")
_DOUBLE = np.dtype("<f8")


def save_model(params: EncoderParams, path: str | Path) -> None:
    header = _HEADER.pack(MODEL_MAGIC, params.dim, params.n_features, params.seed)
    body = np.ascontiguousarray(params.projection, dtype=_DOUBLE).tobytes()
    Path(path).write_bytes(header + body)
    logger.info("model_saved", path=str(path), fingerprint=f"{params.fingerprint():016x}")


def load_model(path: str | Path) -> EncoderParams:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise RankvecDataError("truncated model header", path=path)
    magic, dim, n_features, seed = _HEADER.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise RankvecDataError(f"bad model magic {magic!r}", path=path)
    expected = _HEADER.size + dim * n_features * _DOUBLE.itemsize
    if dim == 0 or n_features == 0 or len(buf) != expected:
        raise RankvecDataError(
            f"model size mismatch: expected {expected} bytes for D={dim} F={n_features}, got {len(buf)}",
            path=path,
        )
    projection = np.frombuffer(buf, dtype=_DOUBLE, offset=_HEADER.size).reshape(dim, n_features)
    if not np.all(np.isfinite(projection)):
        raise RankvecDataError("non-finite model weight", path=path)
    return EncoderParams(projection=projection.astype(np.float64), seed=seed)
