"""Training objectives for the retrained encoder E_2 and their gradients.

* contrastive loss with in-batch negatives (summed over the batch);
* rank-distillation MSE between rank-vector similarities of the frozen base
  encoder E_1 and cosine similarities of E_2, restricted to pairs whose
  rank similarity lies in [tau_l, tau_u];
* hinge combination ``max(lambda_train * l_r, l_cl)``.

Gradients are exact for the linear encoder ``v = W f``: the chain runs
through softmax cross-entropy / squared error, the cosine matrix, the row
normalisation and finally the projection.  At an exact hinge tie the
contrastive branch is differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

import numpy as np
import numpy.typing as npt

from src.common.errors import RankvecDomainError, RankvecUsageError
from src.numerics.linalg import normalize_rows
from src.processing.rank_vectors import rank_similarity_matrix, rank_vectors

if TYPE_CHECKING:
    from src.common.settings import TrainConfig
    from src.ml.encoders import Encoder, EncoderParams
    from src.storage.corpus_index import CorpusIndex
    from src.storage.models.sentence import Sentence

Matrix = npt.NDArray[np.float64]
Branch = Literal["contrastive", "rank"]


@dataclass(frozen=True)
class BatchRankTargets:
    """Rank-vector similarity matrix of a batch and its pair filter."""

    sims: Matrix = field(repr=False)
    mask: npt.NDArray[np.bool_] = field(repr=False)

    @property
    def n_pairs(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class TrainingBatch:
    """Anchor features and their dropout-perturbed positives (both m×F)."""

    anchor_features: Matrix = field(repr=False)
    positive_features: Matrix = field(repr=False)

    def __post_init__(self) -> None:
        if self.anchor_features.shape != self.positive_features.shape:
            raise RankvecUsageError(
                f"anchor features {self.anchor_features.shape} != "
                f"positive features {self.positive_features.shape}"
            )

    @property
    def size(self) -> int:
        return int(self.anchor_features.shape[0])


@dataclass(frozen=True)
class LossBreakdown:
    l_cl: float
    l_r: float
    lambda_lr: float
    l_total: float
    branch: Branch


# ── forward ──────────────────────────────────────────────────────────


def _check_pair(a: Matrix, b: Matrix) -> None:
    if a.ndim != 2 or a.shape != b.shape:
        raise RankvecUsageError(f"embedding batches must have equal shapes, got {a.shape} and {b.shape}")
    if a.shape[0] < 1:
        raise RankvecUsageError("empty embedding batch")


def _log_softmax_rows(logits: Matrix) -> Matrix:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def contrastive_loss(anchors: Matrix, positives: Matrix, temperature: float) -> float:
    """Sum over the batch of -log softmax(cos(v_i, v_j+)/tau)[i]."""
    a = np.asarray(anchors, dtype=np.float64)
    p = np.asarray(positives, dtype=np.float64)
    _check_pair(a, p)
    if temperature <= 0.0:
        raise RankvecUsageError(f"temperature must be positive, got {temperature}")
    ua, _ = normalize_rows(a)
    up, _ = normalize_rows(p)
    logp = _log_softmax_rows((ua @ up.T) / temperature)
    return float(-np.trace(logp))


def rank_targets_from_vectors(u: Matrix, tau_l: float, tau_u: float) -> BatchRankTargets:
    """Similarity matrix and [tau_l, tau_u] filter from stacked rank vectors."""
    if tau_l > tau_u:
        raise RankvecUsageError("tau_l must not exceed tau_u")
    sims = rank_similarity_matrix(u)
    mask = (sims >= tau_l) & (sims <= tau_u)
    sims.setflags(write=False)
    mask.setflags(write=False)
    return BatchRankTargets(sims=sims, mask=mask)


def batch_rank_targets(
    index: CorpusIndex,
    batch: list[Sentence],
    encoder: Encoder,
    tau_l: float,
    tau_u: float,
    *,
    threads: int | None = 1,
) -> BatchRankTargets:
    """Rank targets of a batch under the frozen base encoder E_1."""
    if len(batch) < 2:
        raise RankvecUsageError(f"rank targets need a batch of at least 2, got {len(batch)}")
    embeddings = encoder.encode_batch(batch)
    try:
        u = rank_vectors(index, embeddings, threads=threads)
    except RankvecDomainError:
        # locate the offending sentence for the message
        for s, e in zip(batch, embeddings, strict=True):
            try:
                rank_vectors(index, e[None, :])
            except RankvecDomainError as exc:
                raise RankvecDomainError(f"sentence {s.id} ({s.text!r}): {exc}") from exc
        raise
    return rank_targets_from_vectors(u, tau_l, tau_u)


def rank_loss(targets: BatchRankTargets, embeddings: Matrix) -> float:
    """Mean squared error over masked pairs; 0 when no pair passes the filter."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != targets.sims.shape[0]:
        raise RankvecUsageError(
            f"{x.shape[0] if x.ndim == 2 else x.shape} embeddings for a "
            f"{targets.sims.shape[0]}-sentence target matrix"
        )
    ux, _ = normalize_rows(x)
    count = targets.n_pairs
    if count == 0:
        return 0.0
    diff = np.where(targets.mask, targets.sims - ux @ ux.T, 0.0)
    return float((diff**2).sum() / count)


def total_loss(l_cl: float, l_r: float, lambda_train: float) -> float:
    """Hinge combination ``max(lambda_train * l_r, l_cl)``."""
    return max(lambda_train * l_r, l_cl)


# ── backward ─────────────────────────────────────────────────────────


def _normalize_backward(grad_unit: Matrix, unit: Matrix, norms: npt.NDArray[np.float64]) -> Matrix:
    """Pull a gradient w.r.t. unit rows back to the un-normalised rows."""
    radial = np.einsum("ij,ij->i", grad_unit, unit)
    return (grad_unit - radial[:, None] * unit) / norms[:, None]


def _contrastive_grads(anchors: Matrix, positives: Matrix, temperature: float) -> tuple[float, Matrix, Matrix]:
    ua, na = normalize_rows(anchors)
    up, np_ = normalize_rows(positives)
    logp = _log_softmax_rows((ua @ up.T) / temperature)
    loss = float(-np.trace(logp))
    grad_cos = (np.exp(logp) - np.eye(anchors.shape[0])) / temperature
    grad_a = _normalize_backward(grad_cos @ up, ua, na)
    grad_p = _normalize_backward(grad_cos.T @ ua, up, np_)
    return loss, grad_a, grad_p


def _rank_grads(targets: BatchRankTargets, embeddings: Matrix) -> tuple[float, Matrix]:
    ux, nx = normalize_rows(embeddings)
    count = targets.n_pairs
    if count == 0:
        return 0.0, np.zeros_like(embeddings)
    diff = np.where(targets.mask, targets.sims - ux @ ux.T, 0.0)
    loss = float((diff**2).sum() / count)
    grad_cos = -2.0 * diff / count
    grad_x = _normalize_backward((grad_cos + grad_cos.T) @ ux, ux, nx)
    return loss, grad_x


def loss_and_gradient(
    params: EncoderParams,
    batch: TrainingBatch,
    targets: BatchRankTargets,
    config: TrainConfig,
) -> tuple[LossBreakdown, Matrix]:
    """Total loss of one batch and its (sub)gradient w.r.t. the projection."""
    if batch.size != targets.sims.shape[0]:
        raise RankvecUsageError(f"batch of {batch.size} vs targets for {targets.sims.shape[0]}")
    w = params.projection
    anchors = batch.anchor_features @ w.T
    positives = batch.positive_features @ w.T

    l_cl, grad_a, grad_p = _contrastive_grads(anchors, positives, config.temperature)
    l_r, grad_x = _rank_grads(targets, anchors)
    lambda_lr = config.lambda_train * l_r
    branch: Branch = "rank" if lambda_lr > l_cl else "contrastive"

    if branch == "rank":
        grad = config.lambda_train * (grad_x.T @ batch.anchor_features)
    else:
        grad = grad_a.T @ batch.anchor_features + grad_p.T @ batch.positive_features
    breakdown = LossBreakdown(
        l_cl=l_cl,
        l_r=l_r,
        lambda_lr=lambda_lr,
        l_total=total_loss(l_cl, l_r, config.lambda_train),
        branch=branch,
    )
    return breakdown, grad


def gradient(
    params: EncoderParams,
    batch: TrainingBatch,
    targets: BatchRankTargets,
    config: TrainConfig,
) -> Matrix:
    """Gradient of the hinge total loss w.r.t. the projection matrix."""
    return loss_and_gradient(params, batch, targets, config)[1]
