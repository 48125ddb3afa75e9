"""Resolve encoder backends from CLI specs and persisted descriptors."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from src.common.errors import RankvecUsageError
from src.common.settings import DEFAULT_DIM, DEFAULT_FEATURES
from src.ml.encoders import Encoder, EncoderDescriptor, HashingEncoder, PrecomputedEncoder
from src.storage.embedding_file import load_precomputed
from src.storage.model_file import load_model

if TYPE_CHECKING:
    from src.storage.corpus_index import CorpusIndex


def encoder_from_spec(
    spec: str,
    *,
    dim: int = DEFAULT_DIM,
    n_features: int = DEFAULT_FEATURES,
    seed: int = 0,
) -> Encoder:
    """Build an encoder from ``hash-ngram``, ``precomputed:PATH`` or ``model:PATH``."""
    kind, _, target = spec.partition(":")
    if kind == "hash-ngram" and not target:
        return HashingEncoder.from_seed(seed, dim, n_features)
    if kind == "precomputed" and target:
        return PrecomputedEncoder(load_precomputed(target), Path(target))
    if kind == "model" and target:
        return HashingEncoder(load_model(target), model_path=target)
    raise RankvecUsageError(
        f"unknown encoder spec {spec!r} (expected hash-ngram, precomputed:PATH or model:PATH)"
    )


def encoder_from_descriptor(descriptor: EncoderDescriptor) -> Encoder:
    """Reconstruct the encoder recorded in an index file."""
    if descriptor.kind == "hash-ngram":
        return HashingEncoder.from_seed(
            descriptor.seed or 0, descriptor.dim, descriptor.n_features or DEFAULT_FEATURES
        )
    if descriptor.path is None:
        raise RankvecUsageError(f"{descriptor.kind} descriptor has no path")
    return encoder_from_spec(f"{descriptor.kind}:{descriptor.path}")


def encoder_for_index(index: CorpusIndex) -> Encoder:
    """Encoder that produced *index*, ready to encode queries against it.

    A precomputed table is bound to the index's own sentences; encoding any
    other text raises :class:`RankvecUsageError`.
    """
    encoder = encoder_from_descriptor(index.encoder)
    if isinstance(encoder, PrecomputedEncoder):
        return encoder.bind(index.sentences)
    return encoder
