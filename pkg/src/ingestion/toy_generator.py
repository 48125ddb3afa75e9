"""Synthetic clustered corpus and STS-style pairs for desk-scale experiments.

Words are random consonant-vowel pseudo-words.  Each cluster owns a small
topic pool; clusters ``2f`` and ``2f+1`` additionally share a family pool, so
corpus sentences of one cluster overlap heavily with each other, a little
with their sibling cluster and not at all with other families.

Evaluation pairs control lexical overlap separately from relatedness:

* same cluster:  the second sentence rewords the first with unused words of
  the same pools (no shared word while the pools allow it), gold 3.5-5.0
* same family:   sentences of sibling clusters sharing one family word,
  gold 1.5-3.0
* other family:  disjoint pools, gold 0.0-1.0

on a 0-5 scale, the grade inside each band drawn uniformly.  A reworded
pair and an unrelated pair look alike word by word; only the corpus tells
them apart.  Everything is drawn from one seeded generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from src.common.errors import RankvecUsageError
from src.ingestion.sts_reader import write_sts

logger = structlog.get_logger(__name__)

TOY_SCALE = 5.0
SENTENCE_TOPIC_WORDS = 6
SENTENCE_FAMILY_WORDS = 2
MIN_VOCAB = 8
DEFAULT_VOCAB = 12
DEFAULT_PAIRS = 300

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"

Relation = Literal["same_cluster", "same_family", "other_family"]
RELATIONS: tuple[Relation, ...] = ("same_cluster", "same_family", "other_family")

GOLD_BANDS: dict[Relation, tuple[float, float]] = {
    "same_cluster": (3.5, 5.0),
    "same_family": (1.5, 3.0),
    "other_family": (0.0, 1.0),
}


class ToyPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    s1: str
    s2: str
    gold: float
    relation: Relation
    cluster1: int
    cluster2: int


@dataclass(frozen=True)
class ToyDataset:
    corpus: list[str] = field(repr=False)
    corpus_clusters: list[int] = field(repr=False)
    pairs: list[ToyPair] = field(repr=False)
    seed: int


class _Vocabulary:
    """Disjoint topic and family word pools."""

    def __init__(self, rng: np.random.Generator, clusters: int, vocab: int) -> None:
        self._rng = rng
        self._seen: set[str] = set()
        self.topics = [self._pool(vocab) for _ in range(clusters)]
        self.families = [self._pool(max(SENTENCE_FAMILY_WORDS * 2, vocab // 2)) for _ in range((clusters + 1) // 2)]

    def _word(self) -> str:
        while True:
            syllables = int(self._rng.integers(2, 4))
            word = "".join(
                _CONSONANTS[int(self._rng.integers(len(_CONSONANTS)))] + _VOWELS[int(self._rng.integers(len(_VOWELS)))]
                for _ in range(syllables)
            )
            if word not in self._seen:
                self._seen.add(word)
                return word

    def _pool(self, size: int) -> list[str]:
        return [self._word() for _ in range(size)]


def _pick(
    rng: np.random.Generator, pool: list[str], n: int, avoid: frozenset[str] | set[str] = frozenset()
) -> list[str]:
    """``n`` distinct words of *pool*, words outside *avoid* first."""
    fresh = [w for w in pool if w not in avoid]
    if len(fresh) >= n:
        return [fresh[i] for i in rng.choice(len(fresh), n, replace=False)]
    reused = [w for w in pool if w in avoid]
    return fresh + [reused[i] for i in rng.choice(len(reused), n - len(fresh), replace=False)]


def _shuffled(rng: np.random.Generator, words: list[str]) -> list[str]:
    return [words[i] for i in rng.permutation(len(words))]


def _sentence_words(rng: np.random.Generator, vocab: _Vocabulary, cluster: int) -> list[str]:
    words = _pick(rng, vocab.topics[cluster], SENTENCE_TOPIC_WORDS)
    words += _pick(rng, vocab.families[cluster // 2], SENTENCE_FAMILY_WORDS)
    return _shuffled(rng, words)


def _reworded(rng: np.random.Generator, vocab: _Vocabulary, words: list[str], cluster: int) -> list[str]:
    """Same cluster, as few of the original words as the pools permit."""
    used = set(words)
    out = _pick(rng, vocab.topics[cluster], SENTENCE_TOPIC_WORDS, used)
    out += _pick(rng, vocab.families[cluster // 2], SENTENCE_FAMILY_WORDS, used)
    return _shuffled(rng, out)


def _sibling_sharing_one(
    rng: np.random.Generator, vocab: _Vocabulary, words: list[str], cluster: int, sibling: int
) -> list[str]:
    """Sentence of *sibling* that shares exactly one family word with *words*."""
    family = vocab.families[cluster // 2]
    own = [w for w in words if w in family]
    shared = own[int(rng.integers(len(own)))]
    out = _pick(rng, vocab.topics[sibling], SENTENCE_TOPIC_WORDS)
    out += [shared] + _pick(rng, family, SENTENCE_FAMILY_WORDS - 1, set(own))
    return _shuffled(rng, out)


def _grade(rng: np.random.Generator, relation: Relation) -> float:
    low, high = GOLD_BANDS[relation]
    return round(low + (high - low) * float(rng.random()), 3)


def gen_toy(
    seed: int,
    clusters: int = 6,
    per_cluster: int = 200,
    vocab: int = DEFAULT_VOCAB,
    pairs: int = DEFAULT_PAIRS,
) -> ToyDataset:
    """Deterministic clustered corpus plus evaluation pairs with graded gold."""
    if clusters < 2:
        raise RankvecUsageError(f"clusters must be at least 2, got {clusters}")
    if per_cluster < 2:
        raise RankvecUsageError(f"per_cluster must be at least 2, got {per_cluster}")
    if vocab < MIN_VOCAB:
        raise RankvecUsageError(f"vocab must be at least {MIN_VOCAB}, got {vocab}")
    if pairs < 1:
        raise RankvecUsageError(f"pairs must be positive, got {pairs}")

    rng = np.random.default_rng(seed)
    words = _Vocabulary(rng, clusters, vocab)

    corpus: list[str] = []
    labels: list[int] = []
    for c in range(clusters):
        for _ in range(per_cluster):
            corpus.append(" ".join(_sentence_words(rng, words, c)))
            labels.append(c)

    sibling_families = [f for f in range(len(words.families)) if 2 * f + 1 < clusters]
    toy_pairs: list[ToyPair] = []
    for p in range(pairs):
        relation = RELATIONS[p % len(RELATIONS)]
        if relation == "same_cluster":
            c1 = c2 = int(rng.integers(clusters))
            w1 = _sentence_words(rng, words, c1)
            w2 = _reworded(rng, words, w1, c1)
        elif relation == "same_family":
            fam = sibling_families[int(rng.integers(len(sibling_families)))]
            c1, c2 = (2 * fam, 2 * fam + 1) if rng.random() < 0.5 else (2 * fam + 1, 2 * fam)
            w1 = _sentence_words(rng, words, c1)
            w2 = _sibling_sharing_one(rng, words, w1, c1, c2)
        else:
            c1 = int(rng.integers(clusters))
            others = [c for c in range(clusters) if c // 2 != c1 // 2]
            if not others:
                # two clusters form one family: fall back to the sibling
                others = [c for c in range(clusters) if c != c1]
            c2 = others[int(rng.integers(len(others)))]
            w1 = _sentence_words(rng, words, c1)
            w2 = _sentence_words(rng, words, c2)
        toy_pairs.append(
            ToyPair(
                s1=" ".join(w1),
                s2=" ".join(w2),
                gold=_grade(rng, relation),
                relation=relation,
                cluster1=c1,
                cluster2=c2,
            )
        )

    logger.info(
        "toy_generated",
        seed=seed,
        clusters=clusters,
        per_cluster=per_cluster,
        vocab=vocab,
        corpus=len(corpus),
        pairs=len(toy_pairs),
    )
    return ToyDataset(corpus=corpus, corpus_clusters=labels, pairs=toy_pairs, seed=seed)


def write_toy(dataset: ToyDataset, corpus_path: str | Path, pairs_path: str | Path) -> None:
    """Corpus as one sentence per line, pairs as an STS TSV (both LF)."""
    Path(corpus_path).write_text("".join(f"{s}\n" for s in dataset.corpus), encoding="utf-8", newline="")
    write_sts([(p.s1, p.s2, p.gold) for p in dataset.pairs], pairs_path)
