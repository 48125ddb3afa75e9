"""Unit tests for ranking, normalisation and corpus-anchored rank vectors."""

import math

import numpy as np
import pytest

from src.common.errors import RankvecDomainError, RankvecUsageError
from src.processing.rank_vectors import (
    compute_ranks,
    normalize,
    rank_similarity,
    rank_similarity_matrix,
    rank_vector,
    rank_vectors,
    spearman_oracle,
)
from src.storage.corpus_index import CorpusIndex


@pytest.mark.unit
class TestComputeRanks:
    def test_descending(self) -> None:
        np.testing.assert_array_equal(compute_ranks([0.1, 0.9, 0.5]), [3.0, 1.0, 2.0])

    def test_ties_share_average_rank(self) -> None:
        np.testing.assert_array_equal(compute_ranks([0.5, 0.5, 0.1]), [1.5, 1.5, 3.0])

    def test_too_short(self) -> None:
        with pytest.raises(RankvecUsageError):
            compute_ranks([1.0])


@pytest.mark.unit
class TestNormalize:
    def test_unit_norm_and_centred(self) -> None:
        z = normalize(compute_ranks([0.3, 0.1, 0.7, 0.2])).values
        assert z.sum() == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(z) == pytest.approx(1.0)

    def test_two_element_values(self) -> None:
        z = normalize([1.0, 2.0]).values
        np.testing.assert_allclose(z, [-1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)])

    def test_all_tied_is_degenerate(self) -> None:
        with pytest.raises(RankvecDomainError, match="degenerate"):
            normalize([2.0, 2.0, 2.0])

    def test_monotone_transform_invariance(self) -> None:
        scores = np.array([0.2, -0.4, 0.9, 0.1, 0.5])
        a = normalize(compute_ranks(scores)).values
        b = normalize(compute_ranks(np.exp(3.0 * scores))).values
        np.testing.assert_array_equal(a, b)


@pytest.mark.unit
class TestSimilarity:
    def test_self_similarity_is_one(self) -> None:
        z = normalize(compute_ranks([0.3, 0.1, 0.7, 0.2]))
        assert rank_similarity(z, z) == pytest.approx(1.0)

    def test_reversed_order_is_minus_one(self) -> None:
        a = normalize(compute_ranks([1.0, 2.0, 3.0]))
        b = normalize(compute_ranks([3.0, 2.0, 1.0]))
        assert rank_similarity(a, b) == pytest.approx(-1.0)

    def test_dimension_mismatch(self) -> None:
        with pytest.raises(RankvecUsageError):
            rank_similarity(normalize([1.0, 2.0]), normalize([1.0, 2.0, 3.0]))

    def test_matches_oracle_with_ties(self) -> None:
        a = [0.1, 0.4, 0.4, 0.2, 0.9]
        b = [0.3, 0.3, 0.1, 0.8, 0.5]
        z = rank_similarity(normalize(compute_ranks(a)), normalize(compute_ranks(b)))
        assert z == pytest.approx(spearman_oracle(a, b), abs=1e-12)

    def test_oracle_constant_input(self) -> None:
        with pytest.raises(RankvecDomainError):
            spearman_oracle([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_similarity_matrix_symmetric(self) -> None:
        rng = np.random.default_rng(0)
        u = np.stack([normalize(compute_ranks(rng.normal(size=6))).values for _ in range(4)])
        s = rank_similarity_matrix(u)
        np.testing.assert_array_equal(s, s.T)
        assert np.abs(s).max() <= 1.0


@pytest.mark.unit
class TestCorpusAnchored:
    def test_dimension_is_corpus_size(self, small_index: CorpusIndex) -> None:
        z = rank_vector(small_index, small_index.embeddings[0])
        assert z.dim == small_index.size

    def test_batch_matches_single(self, small_index: CorpusIndex) -> None:
        batch = small_index.embeddings[:10]
        u = rank_vectors(small_index, batch)
        for i in range(10):
            np.testing.assert_array_equal(u[i], rank_vector(small_index, batch[i]).values)

    def test_threaded_matches_serial(self, small_index: CorpusIndex) -> None:
        rng = np.random.default_rng(4)
        batch = rng.normal(size=(20, small_index.dim))
        np.testing.assert_array_equal(
            rank_vectors(small_index, batch, threads=4), rank_vectors(small_index, batch, threads=1)
        )

    def test_scale_invariant(self, small_index: CorpusIndex) -> None:
        e = small_index.embeddings[3]
        np.testing.assert_array_equal(
            rank_vector(small_index, e).values, rank_vector(small_index, 4.0 * e).values
        )

    def test_wrong_dimension(self, small_index: CorpusIndex) -> None:
        with pytest.raises(RankvecUsageError):
            rank_vectors(small_index, np.ones((1, small_index.dim + 1)))

    def test_zero_query(self, small_index: CorpusIndex) -> None:
        with pytest.raises(RankvecDomainError):
            rank_vector(small_index, np.zeros(small_index.dim))
