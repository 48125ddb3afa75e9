"""Shared fixtures: small corpora, encoders, indexes and pair datasets."""

from __future__ import annotations

from pathlib import Path

import pytest

from src.ingestion.toy_generator import ToyDataset, gen_toy
from src.ml.encoders import HashingEncoder
from src.storage.corpus_index import CorpusIndex, build_index
from src.storage.models.sentence import ScoredPair

SMALL_DIM = 16
SMALL_FEATURES = 256

CORPUS_LINES = [
    "the cat sat on the mat",
    "a dog chased the ball across the park",
    "stock prices fell sharply on monday",
    "the kitten slept on a warm rug",
    "investors sold shares after the report",
    "children played football in the park",
    "the market rallied late in the week",
    "a puppy fetched the stick by the lake",
    "cats like to nap in the sun",
    "bond yields rose for a third day",
    "the team won the match in extra time",
    "a bird sang outside the window",
]


@pytest.fixture
def corpus_file(tmp_path: Path) -> Path:
    path = tmp_path / "corpus.txt"
    path.write_text("\n".join(CORPUS_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def hash_encoder() -> HashingEncoder:
    return HashingEncoder.from_seed(7, SMALL_DIM, SMALL_FEATURES)


@pytest.fixture
def small_index(corpus_file: Path, hash_encoder: HashingEncoder) -> CorpusIndex:
    return build_index(corpus_file, hash_encoder)


@pytest.fixture
def sample_pairs() -> list[ScoredPair]:
    raw = [
        ("the cat sat on the mat", "a cat was sitting on the mat", 4.6),
        ("stock prices fell", "shares dropped in value", 3.2),
        ("the dog ran in the park", "a dog played in the park", 4.0),
        ("bond yields rose", "the kitten slept", 0.2),
        ("children played football", "the team won the match", 1.8),
        ("a bird sang", "the market rallied", 0.4),
    ]
    return [ScoredPair.from_raw(s1, s2, gold, 5.0, i) for i, (s1, s2, gold) in enumerate(raw)]


@pytest.fixture(scope="session")
def small_toy() -> ToyDataset:
    return gen_toy(seed=3, clusters=4, per_cluster=30, vocab=16, pairs=60)
