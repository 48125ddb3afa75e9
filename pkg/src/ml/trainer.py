"""Deterministic training loop for the retrained encoder E_2.

E_2 starts fresh from ``config.seed``.  Each epoch shuffles the training
sentences with a seeded generator, builds positive views with feature
dropout, computes rank targets from the frozen E_1 index, and takes one
plain gradient-descent step per batch on ``max(lambda_train * l_r, l_cl)``.
Every step is logged (``train_step``) and appended to the loss trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import polars as pl
import structlog
from pydantic import BaseModel, ConfigDict

from src.common.metrics import timed_stage, training_steps_total
from src.common.settings import TrainConfig
from src.ingestion.corpus_reader import read_corpus
from src.ml.encoders import Encoder, EncoderParams, augment
from src.ml.featurizer import featurize_batch
from src.ml.losses import TrainingBatch, batch_rank_targets, loss_and_gradient
from src.ml.registry import encoder_for_index
from src.storage.corpus_index import CorpusIndex
from src.storage.models.sentence import Sentence

logger = structlog.get_logger(__name__)

LOSS_LOG_COLUMNS = ("step", "l_cl", "lambda_lr", "l_total")
_SEED_BOUND = 2**63 - 1


class LossRecord(BaseModel):
    """One row of the loss trace."""

    model_config = ConfigDict(frozen=True)

    step: int
    epoch: int
    l_cl: float
    lambda_lr: float
    l_total: float
    branch: str


@dataclass(frozen=True)
class TrainingResult:
    params: EncoderParams
    trace: list[LossRecord] = field(default_factory=list)


def train(
    corpus: str | Path | list[Sentence],
    index_e1: CorpusIndex,
    config: TrainConfig,
    *,
    encoder_e1: Encoder | None = None,
    threads: int | None = 1,
) -> TrainingResult:
    """Train a fresh E_2 against rank targets from the E_1 index."""
    sentences = corpus if isinstance(corpus, list) else read_corpus(corpus)
    if encoder_e1 is None:
        encoder_e1 = encoder_for_index(index_e1)
    index_e1.check_encoder(encoder_e1)

    params = EncoderParams.initialize(config.seed, config.dim, config.n_features)
    rng = np.random.default_rng(config.seed)
    trace: list[LossRecord] = []
    logger.info(
        "training_started",
        sentences=len(sentences),
        corpus_size=index_e1.size,
        **config.model_dump(),
    )

    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(sentences))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            # dropout seeds are drawn before the size check so the stream does not depend on it
            seeds = rng.integers(0, _SEED_BOUND, size=len(idx))
            if len(idx) < 2:
                logger.debug("batch_skipped", epoch=epoch, size=len(idx))
                continue
            batch = [sentences[i] for i in idx]
            with timed_stage("train_step"):
                anchor_features = featurize_batch([s.text for s in batch], config.n_features)
                positive_features = np.stack(
                    [
                        augment(s, config.n_features, config.dropout_rate, int(seed)).positive_features
                        for s, seed in zip(batch, seeds, strict=True)
                    ]
                )
                targets = batch_rank_targets(
                    index_e1, batch, encoder_e1, config.tau_l, config.tau_u, threads=threads
                )
                losses, grad = loss_and_gradient(
                    params,
                    TrainingBatch(anchor_features=anchor_features, positive_features=positive_features),
                    targets,
                    config,
                )
                params = params.with_projection(params.projection - config.learning_rate * grad)
            record = LossRecord(
                step=step,
                epoch=epoch,
                l_cl=losses.l_cl,
                lambda_lr=losses.lambda_lr,
                l_total=losses.l_total,
                branch=losses.branch,
            )
            trace.append(record)
            training_steps_total.inc()
            logger.info(
                "train_step",
                step=step,
                epoch=epoch,
                l_cl=losses.l_cl,
                lambda_lr=losses.lambda_lr,
                l_total=losses.l_total,
                branch=losses.branch,
                masked_pairs=targets.n_pairs,
            )
            step += 1

    logger.info("training_finished", steps=step, fingerprint=f"{params.fingerprint():016x}")
    return TrainingResult(params=params, trace=trace)


def loss_frame(trace: list[LossRecord]) -> pl.DataFrame:
    """Loss trace as a DataFrame with the loss-log columns."""
    return pl.DataFrame(
        [r.model_dump(include=set(LOSS_LOG_COLUMNS)) for r in trace],
        schema={"step": pl.Int64, "l_cl": pl.Float64, "lambda_lr": pl.Float64, "l_total": pl.Float64},
    ).select(LOSS_LOG_COLUMNS)


def write_loss_log(trace: list[LossRecord], path: str | Path) -> None:
    loss_frame(trace).write_csv(path, line_terminator="\n")
