"""Micro-benchmark of the two inference-time stages.

For a batch of B query embeddings against an index of n sentences:

* ``rank_vectors``: B×n scores, per-row ranking and normalisation (O(B·D·n))
* ``rank_similarity_matrix``: the B×B inner products of rank vectors (O(B²·n))

Queries are the first B index embeddings (cycled when B > n).  Each stage
is timed ``repeats`` times and the median wall time is reported.  Nothing
is asserted about the numbers.
"""

from __future__ import annotations

import statistics
import time

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from src.common.errors import RankvecUsageError
from src.common.metrics import timed_stage
from src.processing.rank_vectors import rank_similarity_matrix, rank_vectors
from src.storage.corpus_index import CorpusIndex

logger = structlog.get_logger(__name__)

BENCH_COLUMNS = ("stage", "batch_size", "corpus_size", "dim", "seconds")


class BenchRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: str
    batch_size: int
    corpus_size: int
    dim: int
    seconds: float


def bench(
    index: CorpusIndex,
    batch_size: int,
    *,
    repeats: int = 3,
    threads: int | None = 1,
) -> list[BenchRow]:
    if batch_size < 1:
        raise RankvecUsageError(f"batch_size must be positive, got {batch_size}")
    if repeats < 1:
        raise RankvecUsageError(f"repeats must be positive, got {repeats}")
    rows = np.arange(batch_size) % index.size
    queries = np.asarray(index.embeddings[rows])

    rank_times: list[float] = []
    sim_times: list[float] = []
    for _ in range(repeats):
        start = time.perf_counter()
        with timed_stage("bench_rank_vectors"):
            u = rank_vectors(index, queries, threads=threads)
        rank_times.append(time.perf_counter() - start)

        start = time.perf_counter()
        with timed_stage("bench_rank_similarity_matrix"):
            rank_similarity_matrix(u)
        sim_times.append(time.perf_counter() - start)

    report = [
        BenchRow(
            stage=stage,
            batch_size=batch_size,
            corpus_size=index.size,
            dim=index.dim,
            seconds=statistics.median(times),
        )
        for stage, times in (("rank_vectors", rank_times), ("rank_similarity_matrix", sim_times))
    ]
    for row in report:
        logger.info("bench_stage", **row.model_dump())
    return report
