"""Analytic projection gradients against central finite differences."""

from collections.abc import Callable

import numpy as np
import numpy.typing as npt
import pytest

from src.common.settings import TrainConfig
from src.ml.encoders import EncoderParams
from src.ml.losses import (
    BatchRankTargets,
    TrainingBatch,
    contrastive_loss,
    loss_and_gradient,
    rank_loss,
    rank_targets_from_vectors,
)
from src.processing.rank_vectors import compute_ranks, normalize

BATCH, FEATURES, DIM, CORPUS = 3, 8, 4, 10
STEP = 1e-5
INSTANCES = 20


def numeric_gradient(func: Callable[[npt.NDArray[np.float64]], float], w: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """(f(w + h) - f(w - h)) / 2h, one coordinate at a time."""
    grad = np.zeros_like(w)
    shifted = w.copy()
    for i in range(w.size):
        original = shifted.flat[i]
        shifted.flat[i] = original + STEP
        plus = func(shifted)
        shifted.flat[i] = original - STEP
        minus = func(shifted)
        shifted.flat[i] = original
        grad.flat[i] = (plus - minus) / (2.0 * STEP)
    return grad


def _instance(rng: np.random.Generator) -> tuple[EncoderParams, TrainingBatch, BatchRankTargets]:
    anchors = rng.uniform(0.5, 1.5, size=(BATCH, FEATURES))
    keep = rng.random((BATCH, FEATURES)) > 0.3
    keep[:, 0] = True
    positives = anchors * keep
    u = np.stack([normalize(compute_ranks(rng.normal(size=CORPUS))).values for _ in range(BATCH)])
    targets = rank_targets_from_vectors(u, -1.0, 1.0)
    params = EncoderParams(projection=rng.normal(size=(DIM, FEATURES)), seed=0)
    return params, TrainingBatch(anchor_features=anchors, positive_features=positives), targets


def _branch_lambda(params: EncoderParams, batch: TrainingBatch, targets: BatchRankTargets, branch: str) -> float | None:
    """Rank-loss weight that puts the hinge firmly on *branch*, or None if unreachable."""
    w = params.projection
    l_cl = contrastive_loss(batch.anchor_features @ w.T, batch.positive_features @ w.T, 0.5)
    l_r = rank_loss(targets, batch.anchor_features @ w.T)
    if l_r < 1e-3 or l_cl < 1e-3:
        return None
    return (2.0 if branch == "rank" else 0.5) * l_cl / l_r


@pytest.mark.slow
@pytest.mark.timeout(60)
class TestGradients:
    @pytest.mark.parametrize("branch", ["contrastive", "rank"])
    def test_matches_finite_differences(self, branch: str) -> None:
        rng = np.random.default_rng(5 if branch == "rank" else 6)
        checked = 0
        while checked < INSTANCES:
            params, batch, targets = _instance(rng)
            lam = _branch_lambda(params, batch, targets, branch)
            if lam is None:
                continue
            config = TrainConfig(temperature=0.5, lambda_train=lam, tau_l=-1.0, tau_u=1.0)
            breakdown, analytic = loss_and_gradient(params, batch, targets, config)
            assert breakdown.branch == branch

            def total(w: npt.NDArray[np.float64]) -> float:
                perturbed, _ = loss_and_gradient(params.with_projection(w), batch, targets, config)
                assert perturbed.branch == branch
                return perturbed.l_total

            numeric = numeric_gradient(total, np.array(params.projection))
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)
            checked += 1

    def test_empty_mask_rank_gradient_is_zero(self) -> None:
        rng = np.random.default_rng(9)
        params, batch, _ = _instance(rng)
        empty = BatchRankTargets(sims=np.zeros((BATCH, BATCH)), mask=np.zeros((BATCH, BATCH), dtype=bool))
        config = TrainConfig(temperature=0.5, lambda_train=1e6)
        breakdown, _ = loss_and_gradient(params, batch, empty, config)
        assert breakdown.l_r == 0.0
        assert breakdown.branch == "contrastive"
