"""Immutable corpus index: sentences plus their precomputed embedding matrix.

The index is the reference corpus every rank vector is computed against.
Embeddings are stored as float32 and widened to float64; the in-memory index
holds the widened values from the moment it is built, so queries before a
save and after a load see bit-identical data.

File layout::

    b"RKI1" | u32 n | u32 D | u64 fingerprint
    n x (u32 byte length | UTF-8 sentence)
    RKV1 embedding block (see ``embedding_file``)
    u32 byte length | UTF-8 JSON trailer {"created_at", "encoder"}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import numpy.typing as npt
import structlog

from src.common.errors import RankvecDataError, RankvecDomainError, RankvecUsageError
from src.common.metrics import timed_stage
from src.ingestion.corpus_reader import read_corpus
from src.ml.encoders import Encoder, EncoderDescriptor
from src.numerics.linalg import row_norms
from src.storage.embedding_file import embedding_block_bytes, read_embedding_block
from src.storage.models.sentence import Sentence

logger = structlog.get_logger(__name__)

INDEX_MAGIC = b"RKI1"
_HEADER = struct.Struct("<4sIIQ")
_U32 = struct.Struct("<I")

DEFAULT_OVERLAP_K = 100


@dataclass(frozen=True, eq=False)
class CorpusIndex:
    """Corpus C with embedding matrix V (row i belongs to ``sentences[i]``)."""

    sentences: tuple[Sentence, ...]
    embeddings: npt.NDArray[np.float64] = field(repr=False)
    encoder_fingerprint: int
    created_at: datetime
    encoder: EncoderDescriptor
    _unit: npt.NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        emb = np.array(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] != len(self.sentences):
            raise RankvecUsageError(
                f"embedding matrix {emb.shape} does not match {len(self.sentences)} sentences"
            )
        if emb.shape[0] < 2:
            raise RankvecUsageError("an index needs at least 2 sentences")
        if not np.all(np.isfinite(emb)):
            raise RankvecDataError("index embeddings contain non-finite values")
        norms = row_norms(emb)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise RankvecDomainError(f"zero-norm embedding for corpus sentence {int(zero[0])}")
        unit = emb / norms[:, None]
        emb.setflags(write=False)
        unit.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "_unit", unit)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusIndex):
            return NotImplemented
        return (
            self.sentences == other.sentences
            and np.array_equal(self.embeddings, other.embeddings)
            and self.encoder_fingerprint == other.encoder_fingerprint
            and self.created_at == other.created_at
            and self.encoder == other.encoder
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def size(self) -> int:
        return len(self.sentences)

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def scores(self, e: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Cosine of *e* against every corpus embedding, clamped to [-1, 1]."""
        vec = np.asarray(e, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise RankvecUsageError(f"query dimension {vec.shape} != index dimension {self.dim}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise RankvecDomainError("cosine undefined for zero-norm query embedding")
        return np.clip(self._unit @ (vec / norm), -1.0, 1.0)

    def check_encoder(self, encoder: Encoder) -> None:
        """Refuse to mix this index's V with queries from a different encoder."""
        fp = encoder.fingerprint()
        if fp != self.encoder_fingerprint:
            raise RankvecDataError(
                f"encoder fingerprint {fp:016x} does not match index fingerprint "
                f"{self.encoder_fingerprint:016x}"
            )


# ── build ────────────────────────────────────────────────────────────


def build_index(corpus_file: str | Path, encoder: Encoder) -> CorpusIndex:
    """Encode every corpus line with *encoder* and freeze the result."""
    path = Path(corpus_file)
    sentences = read_corpus(path)
    with timed_stage("index_build"):
        rows = []
        for s in sentences:
            try:
                rows.append(encoder.encode(s))
            except RankvecDataError:
                raise
            except Exception as exc:
                raise RankvecDataError(f"encoding failed: {exc}", path=path, row=s.id) from exc
        matrix = np.stack(rows).astype(np.float32).astype(np.float64)
    norms = row_norms(matrix)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise RankvecDataError("encoder produced a zero-norm embedding", path=path, row=int(zero[0]))
    created_at = datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)
    index = CorpusIndex(
        sentences=tuple(sentences),
        embeddings=matrix,
        encoder_fingerprint=encoder.fingerprint(),
        created_at=created_at,
        encoder=encoder.descriptor,
    )
    logger.info(
        "index_built",
        n=index.size,
        dim=index.dim,
        encoder=index.encoder.kind,
        fingerprint=f"{index.encoder_fingerprint:016x}",
    )
    return index


# ── persistence ──────────────────────────────────────────────────────


def save_index(index: CorpusIndex, path: str | Path) -> None:
    parts = [_HEADER.pack(INDEX_MAGIC, index.size, index.dim, index.encoder_fingerprint)]
    for s in index.sentences:
        raw = s.text.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
    parts.append(embedding_block_bytes(index.embeddings))
    trailer = json.dumps(
        {
            "created_at": index.created_at.isoformat(),
            "encoder": index.encoder.model_dump(mode="json"),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    parts.append(_U32.pack(len(trailer)))
    parts.append(trailer)
    Path(path).write_bytes(b"".join(parts))
    logger.info("index_saved", path=str(path), n=index.size)


def load_index(path: str | Path) -> CorpusIndex:
    p = Path(path)
    buf = p.read_bytes()
    if len(buf) < _HEADER.size:
        raise RankvecDataError("truncated index header", path=p)
    magic, n, dim, fingerprint = _HEADER.unpack_from(buf)
    if magic != INDEX_MAGIC:
        raise RankvecDataError(f"bad index magic {magic!r}", path=p)
    offset = _HEADER.size
    sentences: list[Sentence] = []
    for i in range(n):
        length = _read_u32(buf, offset, p, row=i)
        offset += _U32.size
        if offset + length > len(buf):
            raise RankvecDataError("truncated sentence block", path=p, row=i)
        try:
            text = buf[offset : offset + length].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RankvecDataError("sentence is not valid UTF-8", path=p, row=i) from exc
        sentences.append(Sentence(text=text, id=i))
        offset += length
    matrix, offset = read_embedding_block(buf, offset, path=p)
    if matrix.shape != (n, dim):
        raise RankvecDataError(f"embedding block shape {matrix.shape} != header ({n}, {dim})", path=p)
    length = _read_u32(buf, offset, p)
    offset += _U32.size
    if offset + length != len(buf):
        raise RankvecDataError("truncated or oversized index trailer", path=p)
    try:
        trailer = json.loads(buf[offset:].decode("utf-8"))
        created_at = datetime.fromisoformat(trailer["created_at"])
        encoder = EncoderDescriptor.model_validate(trailer["encoder"])
    except (ValueError, KeyError, TypeError) as exc:
        raise RankvecDataError(f"malformed index trailer: {exc}", path=p) from exc
    return CorpusIndex(
        sentences=tuple(sentences),
        embeddings=matrix,
        encoder_fingerprint=fingerprint,
        created_at=created_at,
        encoder=encoder,
    )


def _read_u32(buf: bytes, offset: int, path: Path, row: int | None = None) -> int:
    if offset + _U32.size > len(buf):
        raise RankvecDataError("truncated index file", path=path, row=row)
    (value,) = _U32.unpack_from(buf, offset)
    return int(value)


# ── neighbour queries ────────────────────────────────────────────────


def top_k_neighbors(
    index: CorpusIndex, e: npt.NDArray[np.float64], k: int
) -> list[tuple[int, float]]:
    """Exact top-k corpus sentences by cosine; ties go to the lower sentence id."""
    if not 1 <= k <= index.size:
        raise RankvecUsageError(f"k must lie in [1, {index.size}], got {k}")
    scores = index.scores(e)
    ids = np.array([s.id for s in index.sentences])
    order = np.lexsort((ids, -scores))[:k]
    return [(int(ids[i]), float(scores[i])) for i in order]


def neighbor_overlap(
    index: CorpusIndex,
    e1: npt.NDArray[np.float64],
    e2: npt.NDArray[np.float64],
    k: int = DEFAULT_OVERLAP_K,
) -> int:
    """Size of the intersection of the two top-k neighbour sets."""
    first = {sid for sid, _ in top_k_neighbors(index, e1, k)}
    second = {sid for sid, _ in top_k_neighbors(index, e2, k)}
    return len(first & second)
