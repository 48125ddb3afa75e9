"""Property suite: rank-vector inner products reproduce Spearman's rho."""

import numpy as np
import numpy.typing as npt
import pytest
from scipy.stats import rankdata, spearmanr

from src.processing.rank_vectors import compute_ranks, normalize, rank_similarity, spearman_oracle

N_CASES = 1000
MAX_LEN = 500


def _scores(rng: np.random.Generator, n: int, *, tied: bool) -> npt.NDArray[np.float64]:
    """Random scores of length *n*, never constant; *tied* draws from a small integer range."""
    while True:
        if tied:
            values = rng.integers(0, max(2, n // 4), size=n).astype(np.float64)
        else:
            values = rng.normal(size=n)
        if np.unique(values).size > 1:
            return values


def _cases(seed: int) -> list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]:
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(N_CASES):
        n = int(rng.integers(2, MAX_LEN + 1))
        tied = i % 4 == 0
        cases.append((_scores(rng, n, tied=tied), _scores(rng, n, tied=tied), tied))
    return cases


@pytest.fixture(scope="module")
def cases() -> list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]:
    return _cases(20240)


@pytest.mark.slow
@pytest.mark.timeout(60)
class TestSpearmanEquivalence:
    def test_enough_tied_cases(self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]) -> None:
        assert sum(tied for _, _, tied in cases) >= 200

    def test_inner_product_matches_oracle(
        self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]
    ) -> None:
        worst = 0.0
        for a, b, _ in cases:
            via_ranks = rank_similarity(normalize(compute_ranks(a)), normalize(compute_ranks(b)))
            worst = max(worst, abs(via_ranks - spearman_oracle(a, b)))
        assert worst <= 1e-9

    def test_oracle_agrees_with_scipy(
        self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]
    ) -> None:
        for a, b, _ in cases[::10]:
            assert spearman_oracle(a, b) == pytest.approx(float(spearmanr(a, b).statistic), abs=1e-9)

    def test_ascending_convention(
        self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]
    ) -> None:
        for a, b, _ in cases[:200]:
            descending = rank_similarity(normalize(compute_ranks(a)), normalize(compute_ranks(b)))
            ascending = rank_similarity(normalize(rankdata(a)), normalize(rankdata(b)))
            assert ascending == pytest.approx(descending, abs=1e-12)


@pytest.mark.slow
@pytest.mark.timeout(60)
class TestRankVectorInvariants:
    def test_centred_and_unit_norm(
        self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]
    ) -> None:
        for a, _, _ in cases:
            z = normalize(compute_ranks(a)).values
            assert abs(z.sum()) <= 1e-9
            assert abs(np.linalg.norm(z) - 1.0) <= 1e-9

    def test_monotone_transform_is_exact(
        self, cases: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], bool]]
    ) -> None:
        for a, _, tied in cases:
            if tied:
                transformed = a**3 + 2.0
            else:
                transformed = 2.0 * a + 1.0
            np.testing.assert_array_equal(normalize(compute_ranks(transformed)).values, normalize(compute_ranks(a)).values)
