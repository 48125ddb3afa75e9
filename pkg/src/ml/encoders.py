"""Sentence encoders: the trainable hashed-trigram encoder and precomputed vectors.

Two backends implement the :class:`Encoder` protocol:

* :class:`HashingEncoder` -- a linear projection of hashed character-trigram
  features (no nonlinearity).  Serves both as the frozen base encoder E_1
  (``hash-ngram``, reconstructed from its seed) and as the retrained encoder
  E_2 (``model``, loaded from a model file).
* :class:`PrecomputedEncoder` -- looks embeddings up in a table loaded from an
  embedding file (by sentence id while an index is built, by text once bound
  to that index), so externally produced vectors can drive index building
  and rank targets.

Positive views for the contrastive loss come from :func:`augment`, which
applies independent feature-level dropout to a sentence's own features.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Protocol, runtime_checkable

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field

from src.common.errors import RankvecDataError, RankvecUsageError
from src.common.metrics import sentences_encoded_total
from src.common.settings import DEFAULT_DIM, DEFAULT_DROPOUT, DEFAULT_FEATURES
from src.ml.featurizer import featurize
from src.storage.models.sentence import Sentence

logger = structlog.get_logger(__name__)

EncoderKind = Literal["hash-ngram", "precomputed", "model"]


class EncoderDescriptor(BaseModel):
    """How an embedding matrix was produced; persisted inside index files."""

    model_config = ConfigDict(frozen=True)

    kind: EncoderKind
    dim: int = Field(ge=1)
    n_features: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)
    path: str | None = None


# --------------------------------------------------------------------------- #
# Parameters                                                                   #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class EncoderParams:
    """Projection matrix (D×F) of the linear trigram encoder."""

    projection: npt.NDArray[np.float64]
    seed: int

    def __post_init__(self) -> None:
        proj = np.array(self.projection, dtype=np.float64)
        if proj.ndim != 2 or 0 in proj.shape:
            raise RankvecUsageError(f"projection must be a non-empty matrix, got {proj.shape}")
        if not np.all(np.isfinite(proj)):
            raise RankvecUsageError("projection contains non-finite values")
        proj.setflags(write=False)
        object.__setattr__(self, "projection", proj)

    @classmethod
    def initialize(
        cls, seed: int, dim: int = DEFAULT_DIM, n_features: int = DEFAULT_FEATURES
    ) -> EncoderParams:
        """Draw i.i.d. uniform(-1/sqrt(F), 1/sqrt(F)) weights from ``seed``."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(n_features)
        return cls(projection=rng.uniform(-bound, bound, size=(dim, n_features)), seed=seed)

    @property
    def dim(self) -> int:
        return int(self.projection.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.projection.shape[1])

    def with_projection(self, projection: npt.NDArray[np.float64]) -> EncoderParams:
        """New snapshot with updated weights (the seed records the initialisation)."""
        return EncoderParams(projection=projection, seed=self.seed)

    def fingerprint(self) -> int:
        """64-bit digest of the dimensions and the exact weights."""
        digest = hashlib.blake2b(digest_size=8)
        digest.update(np.array(self.projection.shape, dtype="<u4").tobytes())
        digest.update(np.ascontiguousarray(self.projection, dtype="<f8").tobytes())
        return int.from_bytes(digest.digest(), "little")


# --------------------------------------------------------------------------- #
# Encoding                                                                     #
# --------------------------------------------------------------------------- #


def encode(params: EncoderParams, s: Sentence) -> npt.NDArray[np.float64]:
    """Embedding = projection x featurize(s)."""
    return params.projection @ featurize(s.text, params.n_features)


def dropout_features(
    features: npt.NDArray[np.float64], rate: float, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """Zero each coordinate with probability ``rate`` and re-normalise.

    If every non-zero feature is dropped the original features are returned.
    """
    if rate == 0.0:
        return features
    keep = rng.random(features.shape[0]) >= rate
    dropped = np.where(keep, features, 0.0)
    norm = np.linalg.norm(dropped)
    if norm == 0.0:
        return features
    return dropped / norm


@dataclass(frozen=True)
class AugmentedPair:
    """An anchor sentence and its dropout-perturbed positive features."""

    anchor: Sentence
    positive_features: npt.NDArray[np.float64] = field(repr=False)
    dropout_rate: float
    rng_seed: int


def augment(
    anchor: Sentence,
    n_features: int,
    dropout_rate: float = DEFAULT_DROPOUT,
    rng_seed: int = 0,
) -> AugmentedPair:
    """Build the positive view of *anchor* from its own features only."""
    if not 0.0 <= dropout_rate < 1.0:
        raise RankvecUsageError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
    features = featurize(anchor.text, n_features)
    rng = np.random.default_rng(rng_seed)
    return AugmentedPair(
        anchor=anchor,
        positive_features=dropout_features(features, dropout_rate, rng),
        dropout_rate=dropout_rate,
        rng_seed=rng_seed,
    )


def encode_positive(params: EncoderParams, p: AugmentedPair) -> npt.NDArray[np.float64]:
    """Embedding of the positive view of an augmented pair."""
    if p.positive_features.shape[0] != params.n_features:
        raise RankvecUsageError(
            f"pair has {p.positive_features.shape[0]} features, params expect {params.n_features}"
        )
    return params.projection @ p.positive_features


# --------------------------------------------------------------------------- #
# Backends                                                                     #
# --------------------------------------------------------------------------- #


@runtime_checkable
class Encoder(Protocol):
    """Anything that maps sentences to fixed-dimension embeddings."""

    @property
    def descriptor(self) -> EncoderDescriptor: ...

    @property
    def dim(self) -> int: ...

    def fingerprint(self) -> int: ...

    def encode(self, sentence: Sentence) -> npt.NDArray[np.float64]: ...

    def encode_batch(self, sentences: list[Sentence]) -> npt.NDArray[np.float64]: ...


class HashingEncoder:
    """Linear hashed-trigram encoder backed by :class:`EncoderParams`."""

    def __init__(self, params: EncoderParams, *, model_path: str | Path | None = None) -> None:
        self.params = params
        self._model_path = None if model_path is None else str(model_path)

    @classmethod
    def from_seed(
        cls, seed: int, dim: int = DEFAULT_DIM, n_features: int = DEFAULT_FEATURES
    ) -> HashingEncoder:
        return cls(EncoderParams.initialize(seed, dim, n_features))

    @property
    def descriptor(self) -> EncoderDescriptor:
        if self._model_path is not None:
            return EncoderDescriptor(
                kind="model",
                dim=self.params.dim,
                n_features=self.params.n_features,
                seed=self.params.seed,
                path=self._model_path,
            )
        return EncoderDescriptor(
            kind="hash-ngram",
            dim=self.params.dim,
            n_features=self.params.n_features,
            seed=self.params.seed,
        )

    @property
    def dim(self) -> int:
        return self.params.dim

    def fingerprint(self) -> int:
        return self.params.fingerprint()

    def encode(self, sentence: Sentence) -> npt.NDArray[np.float64]:
        sentences_encoded_total.labels(encoder="hash-ngram").inc()
        return encode(self.params, sentence)

    def encode_batch(self, sentences: list[Sentence]) -> npt.NDArray[np.float64]:
        out = np.empty((len(sentences), self.params.dim), dtype=np.float64)
        for i, sentence in enumerate(sentences):
            out[i] = encode(self.params, sentence)
        sentences_encoded_total.labels(encoder="hash-ngram").inc(len(sentences))
        return out


class PrecomputedEncoder:
    """Embedding lookup from an externally produced table.

    A fresh encoder resolves sentences by id, which is how a corpus file maps
    onto table rows when an index is built.  Once bound to the sentences of
    that corpus (:meth:`bind`) it resolves by text and refuses any sentence
    the table was not produced for.
    """

    def __init__(
        self,
        table: dict[int, npt.NDArray[np.float64]],
        path: str | Path,
        *,
        ids_by_text: dict[str, int] | None = None,
    ) -> None:
        if not table:
            raise RankvecDataError("precomputed table is empty", path=path)
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise RankvecDataError(f"inconsistent embedding dimensions {sorted(dims)}", path=path)
        self._table = table
        self._dim = dims.pop()
        self._path = str(path)
        self._ids_by_text = ids_by_text

    def bind(self, corpus: Sequence[Sentence]) -> PrecomputedEncoder:
        """Copy that looks sentences up by their text in *corpus*."""
        ids_by_text: dict[str, int] = {}
        for s in corpus:
            ids_by_text.setdefault(s.text, s.id)
        return PrecomputedEncoder(self._table, self._path, ids_by_text=ids_by_text)

    def _row_id(self, sentence: Sentence) -> int:
        if self._ids_by_text is None:
            return sentence.id
        try:
            return self._ids_by_text[sentence.text]
        except KeyError:
            raise RankvecUsageError(
                f"precomputed embeddings only cover their own corpus; no row for {sentence.text!r}"
            ) from None

    @property
    def descriptor(self) -> EncoderDescriptor:
        return EncoderDescriptor(kind="precomputed", dim=self._dim, path=self._path)

    @property
    def dim(self) -> int:
        return self._dim

    def fingerprint(self) -> int:
        digest = hashlib.blake2b(digest_size=8)
        for key in sorted(self._table):
            digest.update(int(key).to_bytes(8, "little"))
            digest.update(np.ascontiguousarray(self._table[key], dtype="<f8").tobytes())
        return int.from_bytes(digest.digest(), "little")

    def encode(self, sentence: Sentence) -> npt.NDArray[np.float64]:
        row = self._row_id(sentence)
        try:
            vector = self._table[row]
        except KeyError:
            raise RankvecDataError(
                f"no precomputed embedding for sentence id {row}", path=self._path
            ) from None
        sentences_encoded_total.labels(encoder="precomputed").inc()
        return vector

    def encode_batch(self, sentences: list[Sentence]) -> npt.NDArray[np.float64]:
        return np.stack([self.encode(s) for s in sentences])
