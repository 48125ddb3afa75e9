"""Unit tests for precomputed embedding files."""

from pathlib import Path

import numpy as np
import pytest

from src.common.errors import RankvecDataError, RankvecUsageError
from src.storage.embedding_file import load_precomputed, save_precomputed


@pytest.mark.unit
class TestBinaryFormat:
    def test_round_trip_through_float32(self, tmp_path: Path) -> None:
        matrix = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        path = tmp_path / "e.rkv"
        save_precomputed(matrix, path)
        table = load_precomputed(path)
        assert sorted(table) == [0, 1, 2]
        np.testing.assert_array_equal(table[1], matrix[1].astype(np.float32).astype(np.float64))

    def test_trailing_bytes(self, tmp_path: Path) -> None:
        path = tmp_path / "e.rkv"
        save_precomputed(np.ones((2, 2)), path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(RankvecDataError, match="trailing"):
            load_precomputed(path)

    def test_truncated_reports_row(self, tmp_path: Path) -> None:
        path = tmp_path / "e.rkv"
        save_precomputed(np.ones((3, 2)), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(RankvecDataError, match="row=2"):
            load_precomputed(path)

    def test_non_contiguous_ids_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(RankvecUsageError):
            save_precomputed({0: np.ones(2), 5: np.ones(2)}, tmp_path / "e.rkv")


@pytest.mark.unit
class TestTextFormat:
    def test_round_trip_is_exact(self, tmp_path: Path) -> None:
        table = {3: np.array([0.1, -2.5e-7]), 8: np.array([1.0, 2.0])}
        path = tmp_path / "e.tsv"
        save_precomputed(table, path)
        loaded = load_precomputed(path)
        assert sorted(loaded) == [3, 8]
        np.testing.assert_array_equal(loaded[3], table[3])

    def test_dimension_mismatch(self, tmp_path: Path) -> None:
        path = tmp_path / "e.tsv"
        path.write_text("0\t1.0 2.0\n1\t1.0\n", encoding="utf-8")
        with pytest.raises(RankvecDataError, match="row=1"):
            load_precomputed(path)

    def test_duplicate_id(self, tmp_path: Path) -> None:
        path = tmp_path / "e.tsv"
        path.write_text("0\t1.0\n0\t2.0\n", encoding="utf-8")
        with pytest.raises(RankvecDataError, match="duplicate"):
            load_precomputed(path)

    def test_non_finite(self, tmp_path: Path) -> None:
        path = tmp_path / "e.tsv"
        path.write_text("0\t1.0 nan\n", encoding="utf-8")
        with pytest.raises(RankvecDataError, match="non-finite"):
            load_precomputed(path)

    def test_unknown_extension(self, tmp_path: Path) -> None:
        with pytest.raises(RankvecUsageError):
            load_precomputed(tmp_path / "e.npy")
