"""STS evaluation: Spearman's rho between predicted and gold similarity.

Besides the overall score, pairs can be grouped by normalised gold score
into buckets (dissimilar / intermediate / similar by default) and each
bucket scored on its own.  A bucket with fewer than two pairs, or with
constant gold or predicted scores, has no defined correlation and is
reported as ``None``.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict

from src.common.errors import RankvecDomainError, RankvecUsageError
from src.processing.rank_vectors import spearman_oracle
from src.serving.similarity import Scorer
from src.storage.models.sentence import ScoredPair

logger = structlog.get_logger(__name__)

DEFAULT_BUCKET_EDGES: tuple[float, ...] = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
BUCKET_COLUMNS = ("bucket", "lower", "upper", "count", "spearman")


class BucketResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    bucket: int
    lower: float
    upper: float
    count: int
    spearman: float | None


def _gold(dataset: Sequence[ScoredPair]) -> npt.NDArray[np.float64]:
    return np.array([p.gold_normalized for p in dataset], dtype=np.float64)


def evaluate(dataset: Sequence[ScoredPair], scorer: Scorer) -> float:
    """Spearman correlation of the scorer's predictions with gold scores."""
    pairs = list(dataset)
    if len(pairs) < 2:
        raise RankvecUsageError(f"evaluation needs at least 2 pairs, got {len(pairs)}")
    predicted = scorer.score_pairs(pairs)
    try:
        rho = spearman_oracle(predicted, _gold(pairs))
    except RankvecDomainError as exc:
        raise RankvecDomainError(f"evaluation with scorer {scorer.name!r}: {exc}") from exc
    logger.info("sts_evaluated", scorer=scorer.name, pairs=len(pairs), spearman=rho)
    return rho


def assign_buckets(values: npt.NDArray[np.float64], edges: Sequence[float]) -> npt.NDArray[np.intp]:
    """Bucket index per value: bucket b holds ``edges[b] < v <= edges[b+1]``.

    A value on an inner edge belongs to the lower bucket; the first edge
    itself opens bucket 0.  Out-of-range values clamp to the outer buckets.
    """
    e = np.asarray(edges, dtype=np.float64)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0.0):
        raise RankvecUsageError(f"bucket edges must be strictly increasing with at least 2 entries, got {list(edges)}")
    idx = np.searchsorted(e, values, side="left") - 1
    return np.clip(idx, 0, e.size - 2)


def safe_spearman(predicted: npt.NDArray[np.float64], gold: npt.NDArray[np.float64]) -> float | None:
    """Spearman of a subset, or ``None`` when it is undefined there."""
    if predicted.size < 2:
        return None
    try:
        return spearman_oracle(predicted, gold)
    except RankvecDomainError:
        return None


def bucket_evaluate(
    dataset: Sequence[ScoredPair],
    scorer: Scorer,
    edges: Sequence[float] = DEFAULT_BUCKET_EDGES,
) -> list[BucketResult]:
    """Per-bucket Spearman correlation, buckets keyed on normalised gold score."""
    pairs = list(dataset)
    if not pairs:
        raise RankvecUsageError("bucket evaluation needs at least one pair")
    gold = _gold(pairs)
    buckets = assign_buckets(gold, edges)
    predicted = scorer.score_pairs(pairs)

    results = []
    for b in range(len(edges) - 1):
        sel = buckets == b
        rho = safe_spearman(predicted[sel], gold[sel])
        results.append(
            BucketResult(
                bucket=b,
                lower=float(edges[b]),
                upper=float(edges[b + 1]),
                count=int(sel.sum()),
                spearman=rho,
            )
        )
        if rho is None:
            logger.warning("bucket_spearman_undefined", scorer=scorer.name, bucket=b, count=int(sel.sum()))
    return results
