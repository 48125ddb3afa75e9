"""End-to-end runs on the synthetic toy corpus: index, train, score, analyse."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from src.cli.rankvec import run
from src.common.settings import InferenceConfig, TrainConfig
from src.evaluation.representation_analysis import pair_overlaps, representation_quality
from src.evaluation.sts_evaluation import evaluate
from src.ingestion.sts_reader import read_sts
from src.ingestion.toy_generator import TOY_SCALE, ToyDataset, gen_toy, write_toy
from src.ml.encoders import HashingEncoder
from src.ml.trainer import train
from src.serving.similarity import BlendScorer, CosineScorer, make_scorer
from src.storage.corpus_index import CorpusIndex, build_index
from src.storage.models.sentence import ScoredPair

SEEDS = (0, 1, 2)
SLACK = 0.005
OVERLAP_K = 100


@dataclass(frozen=True)
class SeedRun:
    toy: ToyDataset
    pairs: list[ScoredPair]
    base: HashingEncoder
    index: CorpusIndex
    cosine: float
    rank_only: float
    retrained_blend: float


def _seed_run(seed: int, workdir: Path) -> SeedRun:
    toy = gen_toy(seed)
    corpus_path, pairs_path = workdir / f"toy{seed}.txt", workdir / f"toy{seed}.tsv"
    write_toy(toy, corpus_path, pairs_path)
    pairs = read_sts(pairs_path, scale=TOY_SCALE)

    base = HashingEncoder.from_seed(seed)
    index = build_index(corpus_path, base)
    result = train(corpus_path, index, TrainConfig(seed=seed, epochs=1), encoder_e1=base)
    retrained = HashingEncoder(result.params)
    index_e2 = build_index(corpus_path, retrained)

    return SeedRun(
        toy=toy,
        pairs=pairs,
        base=base,
        index=index,
        cosine=evaluate(pairs, CosineScorer(base)),
        rank_only=evaluate(pairs, make_scorer("rank", base, index)),
        retrained_blend=evaluate(pairs, BlendScorer(index_e2, retrained, InferenceConfig(lambda_inf=0.1))),
    )


@pytest.fixture(scope="module")
def seed_runs(tmp_path_factory: pytest.TempPathFactory) -> list[SeedRun]:
    workdir = tmp_path_factory.mktemp("toy")
    return [_seed_run(seed, workdir) for seed in SEEDS]


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(300)
class TestDirection:
    def test_rank_vectors_alone_match_or_beat_cosine(self, seed_runs: list[SeedRun]) -> None:
        for r in seed_runs:
            assert r.rank_only >= r.cosine - SLACK, (r.toy.seed, r.rank_only, r.cosine)
        assert np.mean([r.rank_only for r in seed_runs]) > np.mean([r.cosine for r in seed_runs])

    def test_retrained_blend_matches_or_beats_cosine(self, seed_runs: list[SeedRun]) -> None:
        for r in seed_runs:
            assert r.retrained_blend >= r.cosine - SLACK, (r.toy.seed, r.retrained_blend, r.cosine)
        assert np.mean([r.retrained_blend for r in seed_runs]) > np.mean([r.cosine for r in seed_runs])


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(300)
class TestNeighbourOverlap:
    def test_within_cluster_pairs_share_more_neighbours(self, seed_runs: list[SeedRun]) -> None:
        r = seed_runs[0]
        _, overlaps = pair_overlaps(r.pairs, r.index, r.base, OVERLAP_K)
        within = [o for o, p in zip(overlaps, r.toy.pairs, strict=True) if p.cluster1 == p.cluster2]
        across = [o for o, p in zip(overlaps, r.toy.pairs, strict=True) if p.cluster1 != p.cluster2]
        assert np.mean(within) > np.mean(across)

    def test_matches_brute_force_intersection(self, seed_runs: list[SeedRun]) -> None:
        r = seed_runs[0]
        _, overlaps = pair_overlaps(r.pairs, r.index, r.base, OVERLAP_K)
        rng = np.random.default_rng(17)
        for i in rng.choice(len(r.pairs), size=100, replace=False):
            p = r.pairs[int(i)]
            # stable sort keeps equal scores in row order, i.e. lower id first
            top1 = set(np.argsort(-r.index.scores(r.base.encode(p.s1)), kind="stable")[:OVERLAP_K].tolist())
            top2 = set(np.argsort(-r.index.scores(r.base.encode(p.s2)), kind="stable")[:OVERLAP_K].tolist())
            assert overlaps[int(i)] == len(top1 & top2)


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(300)
class TestUniformity:
    def test_rank_vectors_are_more_uniform(self, seed_runs: list[SeedRun]) -> None:
        r = seed_runs[0]
        embedding, rank = representation_quality(r.pairs, r.index, r.base)
        assert rank.uniformity <= embedding.uniformity
        assert math.isfinite(embedding.alignment) and math.isfinite(rank.alignment)


@pytest.mark.integration
@pytest.mark.timeout(300)
class TestReproducibility:
    def _eval_digest(self, workdir: Path, capsys: pytest.CaptureFixture[str]) -> str:
        corpus, pairs, index = workdir / "c.txt", workdir / "p.tsv", workdir / "e1.rki"
        assert run(["gen-toy", "--seed", "4", "--clusters", "4", "--per-cluster", "20", "--pairs", "30",
                    "--corpus-out", str(corpus), "--pairs-out", str(pairs)]) == 0  # fmt: skip
        assert run(["index", "--corpus", str(corpus), "--dim", "16", "--features", "256", "--out", str(index)]) == 0
        capsys.readouterr()
        assert run(["analyze", "buckets", "--dataset", str(pairs), "--index", str(index)]) == 0
        return hashlib.sha256(capsys.readouterr().out.encode("utf-8")).hexdigest()

    def test_same_seed_same_csv(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        first, second = tmp_path / "a", tmp_path / "b"
        first.mkdir()
        second.mkdir()
        assert self._eval_digest(first, capsys) == self._eval_digest(second, capsys)
