"""Prometheus metrics for the rankvec pipeline stages.

Counters and histograms cover every expensive stage -- encoding, rank-vector
computation, training steps and pair scoring.  The CLI is a batch tool, so
instead of a scrape endpoint the registry can be dumped in the text
exposition format with :func:`write_metrics` (``rankvec --metrics-out``).
"""

from __future__ import annotations

import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

# --------------------------------------------------------------------------- #
# Counters                                                                     #
# --------------------------------------------------------------------------- #
sentences_encoded_total = Counter(
    "rankvec_sentences_encoded_total",
    "Sentences mapped to embeddings.",
    labelnames=["encoder"],
)

rank_vectors_total = Counter(
    "rankvec_rank_vectors_total",
    "Rank vectors computed against a corpus index.",
)

training_steps_total = Counter(
    "rankvec_training_steps_total",
    "Gradient steps applied to the retrained encoder.",
)

pairs_scored_total = Counter(
    "rankvec_pairs_scored_total",
    "Sentence pairs scored.",
    labelnames=["scorer"],
)

# --------------------------------------------------------------------------- #
# Histograms                                                                   #
# --------------------------------------------------------------------------- #
stage_seconds = Histogram(
    "rankvec_stage_seconds",
    "Wall time of a pipeline stage.",
    labelnames=["stage"],
    buckets=(0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0),
)


@contextmanager
def timed_stage(stage: str) -> Iterator[None]:
    """Observe the wall time of the enclosed block under ``stage``."""
    start = time.perf_counter()
    try:
        yield
    finally:
        stage_seconds.labels(stage=stage).observe(time.perf_counter() - start)


def write_metrics(path: str | Path) -> None:
    """Dump the default registry to *path* in Prometheus text format."""
    write_to_textfile(str(path), REGISTRY)
