"""Loss-scaling study: retrain E_2 for several lambda_train values.

Every run uses the same seed and corpus, so the only moving part is the
weight of the rank loss.  For each value the final-epoch means of l_cl,
lambda_train * l_r and l_total are reported.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import structlog
from pydantic import BaseModel, ConfigDict

from src.common.errors import RankvecUsageError
from src.common.settings import TrainConfig
from src.ml.encoders import Encoder
from src.ml.trainer import train
from src.storage.corpus_index import CorpusIndex
from src.storage.models.sentence import Sentence

logger = structlog.get_logger(__name__)

LAMBDA_COLUMNS = ("lambda_train", "l_cl", "lambda_lr", "l_total")
DEFAULT_LAMBDAS: tuple[float, ...] = (0.01, 0.05, 0.1, 0.5, 1.0)


class LambdaPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_train: float
    l_cl: float
    lambda_lr: float
    l_total: float


def lambda_sweep(
    corpus: str | Path | list[Sentence],
    index_e1: CorpusIndex,
    config: TrainConfig,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    *,
    encoder_e1: Encoder | None = None,
    threads: int | None = 1,
) -> list[LambdaPoint]:
    if not lambdas:
        raise RankvecUsageError("lambda sweep needs at least one lambda_train value")
    if config.epochs < 1:
        raise RankvecUsageError("lambda sweep needs at least one training epoch")
    points = []
    for lam in lambdas:
        if lam <= 0.0:
            raise RankvecUsageError(f"lambda_train must be positive, got {lam}")
        run_config = config.model_copy(update={"lambda_train": float(lam)})
        result = train(corpus, index_e1, run_config, encoder_e1=encoder_e1, threads=threads)
        last = [r for r in result.trace if r.epoch == config.epochs - 1]
        if not last:
            raise RankvecUsageError("corpus too small for a single training step")
        n = len(last)
        point = LambdaPoint(
            lambda_train=float(lam),
            l_cl=sum(r.l_cl for r in last) / n,
            lambda_lr=sum(r.lambda_lr for r in last) / n,
            l_total=sum(r.l_total for r in last) / n,
        )
        logger.info("lambda_point", **point.model_dump())
        points.append(point)
    return points
