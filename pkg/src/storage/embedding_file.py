"""Reader / writer for embedding tables (binary ``.rkv`` and text ``.tsv``).

Binary layout::

    b"RKV1" | u32 n | u32 D | n*D float32, little-endian, row-major

Rows are widened to float64 on load; row ``i`` gets sentence id ``i``.
The text layout is one line per sentence: ``id<TAB>v1 v2 ... vD``.
The format is chosen by file extension.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np
import numpy.typing as npt
import structlog

from src.common.errors import RankvecDataError, RankvecUsageError

logger = structlog.get_logger(__name__)

EMBEDDING_MAGIC = b"RKV1"
_HEADER = struct.Struct("<4sII")
_FLOAT = np.dtype("<f4")

EmbeddingTable = dict[int, npt.NDArray[np.float64]]


# ── binary block (shared with the index file) ────────────────────────


def embedding_block_bytes(matrix: npt.NDArray[np.float64]) -> bytes:
    """Serialise an n×D matrix as an RKV1 block (values narrowed to float32)."""
    n, d = matrix.shape
    return _HEADER.pack(EMBEDDING_MAGIC, n, d) + np.ascontiguousarray(matrix, dtype=_FLOAT).tobytes()


def read_embedding_block(
    buf: bytes, offset: int = 0, *, path: str | Path | None = None
) -> tuple[npt.NDArray[np.float64], int]:
    """Parse an RKV1 block at *offset*; return ``(matrix, end_offset)``."""
    if len(buf) - offset < _HEADER.size:
        raise RankvecDataError("truncated embedding header", path=path)
    magic, n, d = _HEADER.unpack_from(buf, offset)
    if magic != EMBEDDING_MAGIC:
        raise RankvecDataError(f"bad embedding magic {magic!r}", path=path)
    if n == 0 or d == 0:
        raise RankvecDataError(f"malformed embedding header n={n} D={d}", path=path)
    start = offset + _HEADER.size
    end = start + n * d * _FLOAT.itemsize
    if len(buf) < end:
        available = (len(buf) - start) // (d * _FLOAT.itemsize)
        raise RankvecDataError("truncated embedding block", path=path, row=available)
    matrix = np.frombuffer(buf, dtype=_FLOAT, count=n * d, offset=start).reshape(n, d)
    widened = matrix.astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(widened), axis=1))
    if bad.size:
        raise RankvecDataError("non-finite embedding value", path=path, row=int(bad[0]))
    return widened, end


# ── public API ───────────────────────────────────────────────────────


def load_precomputed(path: str | Path) -> EmbeddingTable:
    """Load an embedding table, sniffing the format from the extension."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".rkv":
        buf = p.read_bytes()
        matrix, end = read_embedding_block(buf, path=p)
        if end != len(buf):
            raise RankvecDataError(f"{len(buf) - end} trailing bytes after embedding block", path=p)
        table = {i: matrix[i] for i in range(matrix.shape[0])}
    elif suffix == ".tsv":
        table = _load_tsv(p)
    else:
        raise RankvecUsageError(f"unknown embedding file extension {suffix!r} (expected .rkv or .tsv)")
    logger.info("embeddings_loaded", path=str(p), n=len(table), dim=next(iter(table.values())).shape[0])
    return table


def _load_tsv(path: Path) -> EmbeddingTable:
    table: EmbeddingTable = {}
    dim: int | None = None
    with path.open(encoding="utf-8", newline="") as fh:
        for row, line in enumerate(fh):
            line = line.rstrip("\r\n")
            if not line:
                continue
            key, sep, rest = line.partition("\t")
            if not sep:
                raise RankvecDataError("missing TAB separator", path=path, row=row)
            try:
                sid = int(key)
                values = np.array([float(tok) for tok in rest.split()], dtype=np.float64)
            except ValueError as exc:
                raise RankvecDataError(f"unparseable row ({exc})", path=path, row=row) from exc
            if values.size == 0:
                raise RankvecDataError("empty embedding row", path=path, row=row)
            if not np.all(np.isfinite(values)):
                raise RankvecDataError("non-finite embedding value", path=path, row=row)
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise RankvecDataError(
                    f"dimension mismatch: expected {dim}, got {values.size}", path=path, row=row
                )
            if sid in table:
                raise RankvecDataError(f"duplicate sentence id {sid}", path=path, row=row)
            table[sid] = values
    if not table:
        raise RankvecDataError("embedding file contains no rows", path=path)
    return table


def save_precomputed(table: EmbeddingTable | npt.NDArray[np.float64], path: str | Path) -> None:
    """Write an embedding table in the format implied by the extension.

    The binary format has no id column, so a dict table must use ids 0..n-1.
    """
    p = Path(path)
    if isinstance(table, np.ndarray):
        table = {i: table[i] for i in range(table.shape[0])}
    if not table:
        raise RankvecUsageError("cannot write an empty embedding table")
    suffix = p.suffix.lower()
    if suffix == ".rkv":
        if sorted(table) != list(range(len(table))):
            raise RankvecUsageError("binary embedding files require ids 0..n-1")
        matrix = np.stack([table[i] for i in range(len(table))])
        p.write_bytes(embedding_block_bytes(matrix))
    elif suffix == ".tsv":
        with p.open("w", encoding="utf-8", newline="\n") as fh:
            for sid in sorted(table):
                values = " ".join(_format_float(v) for v in table[sid])
                fh.write(f"{sid}\t{values}\n")
    else:
        raise RankvecUsageError(f"unknown embedding file extension {suffix!r} (expected .rkv or .tsv)")


def _format_float(value: float) -> str:
    v = float(value)
    if not math.isfinite(v):
        raise RankvecUsageError("cannot write non-finite embedding value")
    return repr(v)
