"""Representation analyses: neighbour overlap and uniformity / alignment.

``overlap_analysis`` groups evaluation pairs by their base-encoder cosine
and reports, per group, how many of the top-k corpus neighbours the two
sentences share together with the group's Spearman correlation.

``uniformity_alignment`` measures how evenly a set of vectors covers the
unit sphere and how close positive pairs sit (lower is better for both):

    uniformity = log mean_{i<j} exp(-2 ||x_i - x_j||^2)
    alignment  = mean_{(x, y) positive} ||x - y||^2

on L2-normalised vectors.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict

from src.common.errors import RankvecUsageError
from src.common.metrics import timed_stage
from src.evaluation.sts_evaluation import assign_buckets, safe_spearman
from src.ml.encoders import Encoder
from src.numerics.linalg import cosine, cosine_matrix, normalize_rows
from src.processing.rank_vectors import rank_vectors
from src.serving.similarity import CosineScorer, Scorer
from src.storage.corpus_index import DEFAULT_OVERLAP_K, CorpusIndex, top_k_neighbors
from src.storage.models.sentence import ScoredPair, Sentence

logger = structlog.get_logger(__name__)

DEFAULT_GROUP_EDGES: tuple[float, ...] = (-1.0, 0.0, 0.25, 0.5, 0.75, 1.0)
POSITIVE_GOLD_THRESHOLD = 0.8
UNIFORMITY_T = 2.0

OVERLAP_COLUMNS = ("group", "lower", "upper", "count", "mean_overlap", "spearman")
UNIFORMITY_COLUMNS = ("representation", "uniformity", "alignment")


class OverlapGroup(BaseModel):
    model_config = ConfigDict(frozen=True)

    group: int
    lower: float
    upper: float
    count: int
    mean_overlap: float | None
    spearman: float | None


class RepresentationQuality(BaseModel):
    model_config = ConfigDict(frozen=True)

    representation: str
    uniformity: float
    alignment: float


# ── neighbour overlap ────────────────────────────────────────────────


def pair_overlaps(
    dataset: Sequence[ScoredPair],
    index: CorpusIndex,
    encoder: Encoder,
    k: int = DEFAULT_OVERLAP_K,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.int64]]:
    """Base cosine and top-k neighbour overlap of every pair."""
    index.check_encoder(encoder)
    if not 1 <= k <= index.size:
        raise RankvecUsageError(f"k must lie in [1, {index.size}], got {k}")
    cosines = np.empty(len(dataset), dtype=np.float64)
    overlaps = np.empty(len(dataset), dtype=np.int64)
    neighbours: dict[tuple[int, str], frozenset[int]] = {}

    def _top(s: Sentence, e: npt.NDArray[np.float64]) -> frozenset[int]:
        key = (s.id, s.text)
        if key not in neighbours:
            neighbours[key] = frozenset(sid for sid, _ in top_k_neighbors(index, e, k))
        return neighbours[key]

    for i, pair in enumerate(dataset):
        e1 = encoder.encode(pair.s1)
        e2 = encoder.encode(pair.s2)
        cosines[i] = cosine(e1, e2)
        overlaps[i] = len(_top(pair.s1, e1) & _top(pair.s2, e2))
    return cosines, overlaps


def overlap_analysis(
    dataset: Sequence[ScoredPair],
    index: CorpusIndex,
    encoder: Encoder,
    k: int = DEFAULT_OVERLAP_K,
    group_edges: Sequence[float] = DEFAULT_GROUP_EDGES,
    scorer: Scorer | None = None,
) -> list[OverlapGroup]:
    """Mean neighbour overlap and Spearman per base-cosine group.

    Groups follow the bucket rule of :func:`assign_buckets`.  The Spearman
    column uses *scorer* (base cosine when omitted); empty groups report
    ``None`` for both statistics.
    """
    pairs = list(dataset)
    if not pairs:
        raise RankvecUsageError("overlap analysis needs at least one pair")
    with timed_stage("overlap_analysis"):
        cosines, overlaps = pair_overlaps(pairs, index, encoder, k)
    groups = assign_buckets(cosines, group_edges)
    predicted = (scorer or CosineScorer(encoder)).score_pairs(pairs)
    gold = np.array([p.gold_normalized for p in pairs], dtype=np.float64)

    results = []
    for g in range(len(group_edges) - 1):
        sel = groups == g
        count = int(sel.sum())
        results.append(
            OverlapGroup(
                group=g,
                lower=float(group_edges[g]),
                upper=float(group_edges[g + 1]),
                count=count,
                mean_overlap=float(overlaps[sel].mean()) if count else None,
                spearman=safe_spearman(predicted[sel], gold[sel]),
            )
        )
    logger.info("overlap_analysis_done", pairs=len(pairs), k=k, groups=len(results))
    return results


# ── uniformity / alignment ───────────────────────────────────────────


def uniformity(vectors: npt.NDArray[np.float64]) -> float:
    """Log mean Gaussian potential over distinct pairs of normalised vectors."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise RankvecUsageError(f"uniformity needs at least 2 vectors, got shape {x.shape}")
    sq = np.clip(2.0 - 2.0 * cosine_matrix(x, x), 0.0, 4.0)
    upper = sq[np.triu_indices(x.shape[0], k=1)]
    return float(np.log(np.mean(np.exp(-UNIFORMITY_T * upper))))


def alignment(first: npt.NDArray[np.float64], second: npt.NDArray[np.float64]) -> float:
    """Mean squared distance between normalised positive-pair vectors."""
    a = np.asarray(first, dtype=np.float64)
    b = np.asarray(second, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape != b.shape:
        raise RankvecUsageError(f"alignment needs matching non-empty pair matrices, got {a.shape} and {b.shape}")
    ua, _ = normalize_rows(a, what="vector")
    ub, _ = normalize_rows(b, what="vector")
    return float(np.mean(np.sum((ua - ub) ** 2, axis=1)))


def uniformity_alignment(
    vectors: npt.NDArray[np.float64],
    positive_pairs: Sequence[tuple[int, int]],
) -> tuple[float, float]:
    """(uniformity, alignment) of *vectors*; pairs index rows of *vectors*."""
    x = np.asarray(vectors, dtype=np.float64)
    if not positive_pairs:
        raise RankvecUsageError("alignment needs at least one positive pair")
    idx = np.asarray(positive_pairs, dtype=np.intp)
    if idx.ndim != 2 or idx.shape[1] != 2 or x.ndim != 2 or idx.min() < 0 or idx.max() >= x.shape[0]:
        raise RankvecUsageError("positive pairs must be (row, row) indices into the vector matrix")
    return uniformity(x), alignment(x[idx[:, 0]], x[idx[:, 1]])


def representation_quality(
    dataset: Sequence[ScoredPair],
    index: CorpusIndex,
    encoder: Encoder,
    *,
    positive_threshold: float = POSITIVE_GOLD_THRESHOLD,
    threads: int | None = 1,
) -> list[RepresentationQuality]:
    """Uniformity and alignment of encoder embeddings and of their rank vectors.

    The vector set is every distinct sentence of *dataset*; positive pairs
    are those with normalised gold at or above *positive_threshold*.
    """
    index.check_encoder(encoder)
    rows: dict[tuple[int, str], int] = {}
    sentences: list[Sentence] = []
    positives: list[tuple[int, int]] = []
    for pair in dataset:
        slot = []
        for s in (pair.s1, pair.s2):
            key = (s.id, s.text)
            if key not in rows:
                rows[key] = len(sentences)
                sentences.append(s)
            slot.append(rows[key])
        if pair.gold_normalized >= positive_threshold:
            positives.append((slot[0], slot[1]))
    if len(sentences) < 2:
        raise RankvecUsageError("uniformity needs at least 2 distinct sentences")

    embeddings = encoder.encode_batch(sentences)
    ranks = rank_vectors(index, embeddings, threads=threads)
    results = []
    for name, vectors in (("embedding", embeddings), ("rank_vector", ranks)):
        u, a = uniformity_alignment(vectors, positives)
        results.append(RepresentationQuality(representation=name, uniformity=u, alignment=a))
    logger.info(
        "representation_quality",
        sentences=len(sentences),
        positive_pairs=len(positives),
        **{f"{r.representation}_uniformity": r.uniformity for r in results},
    )
    return results
