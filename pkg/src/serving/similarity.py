"""Pair scoring: encoder cosine, rank-vector similarity, and their weighted blend.

The blended score of a pair is

    lambda_inf * (z1 . z2) + (1 - lambda_inf) * cos(E_2(s1), E_2(s2))

where z1, z2 are rank vectors against an index built with the same E_2
(enforced by fingerprint).  All three scorers share the :class:`Scorer`
interface so evaluation and analysis code can swap them freely.
"""

from __future__ import annotations

from typing import Literal, Protocol

import numpy as np
import numpy.typing as npt
import structlog

from src.common.errors import RankvecUsageError
from src.common.metrics import pairs_scored_total
from src.common.settings import InferenceConfig
from src.ml.encoders import Encoder
from src.numerics.linalg import cosine
from src.processing.rank_vectors import rank_similarity, rank_vector, rank_vectors
from src.storage.corpus_index import CorpusIndex
from src.storage.models.sentence import ScoredPair, Sentence

logger = structlog.get_logger(__name__)

ScorerKind = Literal["cosine", "rank", "blend"]
SCORER_KINDS: tuple[ScorerKind, ...] = ("cosine", "rank", "blend")


def blend_similarity(rank_sim: float, cos_sim: float, lambda_inf: float) -> float:
    """Weighted inference score."""
    return lambda_inf * rank_sim + (1.0 - lambda_inf) * cos_sim


def pair_similarity(
    index_e2: CorpusIndex,
    encoder_e2: Encoder,
    s1: Sentence,
    s2: Sentence,
    cfg: InferenceConfig,
) -> float:
    """Blended similarity of one pair against an E_2 index."""
    index_e2.check_encoder(encoder_e2)
    e1 = encoder_e2.encode(s1)
    e2 = encoder_e2.encode(s2)
    z = rank_similarity(rank_vector(index_e2, e1), rank_vector(index_e2, e2))
    return blend_similarity(z, cosine(e1, e2), cfg.lambda_inf)


# ── batched scorers ──────────────────────────────────────────────────


class Scorer(Protocol):
    name: str

    def score_pairs(self, pairs: list[ScoredPair]) -> npt.NDArray[np.float64]: ...


def _unique_sentences(pairs: list[ScoredPair]) -> tuple[list[Sentence], list[tuple[int, int]]]:
    """Deduplicate pair sentences by (id, text); return them and per-pair row indices."""
    rows: dict[tuple[int, str], int] = {}
    unique: list[Sentence] = []
    slots: list[tuple[int, int]] = []
    for pair in pairs:
        ids = []
        for s in (pair.s1, pair.s2):
            key = (s.id, s.text)
            if key not in rows:
                rows[key] = len(unique)
                unique.append(s)
            ids.append(rows[key])
        slots.append((ids[0], ids[1]))
    return unique, slots


class CosineScorer:
    """Plain encoder cosine (the base-encoder baseline)."""

    name = "cosine"

    def __init__(self, encoder: Encoder) -> None:
        self._encoder = encoder

    def score_pairs(self, pairs: list[ScoredPair]) -> npt.NDArray[np.float64]:
        unique, slots = _unique_sentences(pairs)
        emb = self._encoder.encode_batch(unique)
        pairs_scored_total.labels(scorer=self.name).inc(len(pairs))
        return np.array([cosine(emb[i], emb[j]) for i, j in slots], dtype=np.float64)


class BlendScorer:
    """Weighted rank-vector / cosine blend; ``lambda_inf=1`` is rank-only scoring."""

    def __init__(
        self,
        index: CorpusIndex,
        encoder: Encoder,
        cfg: InferenceConfig,
        *,
        threads: int | None = 1,
    ) -> None:
        index.check_encoder(encoder)
        self._index = index
        self._encoder = encoder
        self._cfg = cfg
        self._threads = threads
        self.name = "rank" if cfg.lambda_inf == 1.0 else "blend"

    def score_pairs(self, pairs: list[ScoredPair]) -> npt.NDArray[np.float64]:
        unique, slots = _unique_sentences(pairs)
        emb = self._encoder.encode_batch(unique)
        z = rank_vectors(self._index, emb, threads=self._threads)
        lam = self._cfg.lambda_inf
        scores = np.array(
            [blend_similarity(rank_similarity(z[i], z[j]), cosine(emb[i], emb[j]), lam) for i, j in slots],
            dtype=np.float64,
        )
        pairs_scored_total.labels(scorer=self.name).inc(len(pairs))
        return scores


def make_scorer(
    kind: ScorerKind,
    encoder: Encoder,
    index: CorpusIndex | None = None,
    cfg: InferenceConfig | None = None,
    *,
    threads: int | None = 1,
) -> Scorer:
    """Scorer factory used by the CLI's ``--scorer`` option."""
    if kind == "cosine":
        return CosineScorer(encoder)
    if index is None:
        raise RankvecUsageError(f"scorer {kind!r} needs a corpus index")
    if kind == "rank":
        return BlendScorer(index, encoder, InferenceConfig(lambda_inf=1.0), threads=threads)
    if kind == "blend":
        return BlendScorer(index, encoder, cfg or InferenceConfig(), threads=threads)
    raise RankvecUsageError(f"unknown scorer {kind!r}")


def score_dataset(pairs: list[ScoredPair], scorer: Scorer) -> list[ScoredPair]:
    """Attach the scorer's prediction to every pair."""
    predicted = scorer.score_pairs(pairs)
    logger.info("pairs_scored", scorer=scorer.name, pairs=len(pairs))
    return [p.with_prediction(float(v)) for p, v in zip(pairs, predicted, strict=True)]
