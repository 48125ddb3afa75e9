"""STS-style pair datasets: ``sentence1 TAB sentence2 TAB gold`` per line.

Files carry no header and no quoting.  Gold scores are on the dataset's own
scale (``scale`` is its maximum, 5.0 for STS-B) and are normalised to [0, 1]
on load.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import polars as pl
import structlog
from pydantic import ValidationError

from src.common.errors import RankvecDataError, RankvecUsageError
from src.storage.models.sentence import ScoredPair

logger = structlog.get_logger(__name__)

DEFAULT_SCALE = 5.0
STS_COLUMNS = ("sentence1", "sentence2", "gold")
SCORE_COLUMNS = ("sentence1", "sentence2", "predicted")


def read_sts(path: str | Path, *, scale: float = DEFAULT_SCALE) -> list[ScoredPair]:
    """Load a pair dataset; every malformed row is a data error naming its line."""
    p = Path(path)
    if scale <= 0.0:
        raise RankvecUsageError(f"scale must be positive, got {scale}")
    if not p.is_file():
        raise RankvecDataError("dataset file not found", path=p)
    try:
        df = pl.read_csv(
            p,
            separator="\t",
            has_header=False,
            quote_char=None,
            schema={name: pl.Utf8 for name in STS_COLUMNS},
            encoding="utf8",
        )
    except pl.exceptions.NoDataError as exc:
        raise RankvecDataError("dataset is empty", path=p) from exc
    except pl.exceptions.PolarsError as exc:
        raise RankvecDataError(f"malformed dataset: {exc}", path=p) from exc

    df = df.with_columns(
        pl.col("sentence2").str.strip_suffix("\r"),
        pl.col("gold").str.strip_chars().cast(pl.Float64, strict=False).alias("gold_value"),
    )
    pairs: list[ScoredPair] = []
    for line_no, row in enumerate(df.iter_rows(named=True), start=1):
        if row["sentence1"] is None or row["sentence2"] is None or row["gold"] is None:
            raise RankvecDataError("expected 3 tab-separated columns", path=p, row=line_no)
        gold = row["gold_value"]
        if gold is None:
            raise RankvecDataError(f"gold score {row['gold']!r} is not a number", path=p, row=line_no)
        if not 0.0 <= gold <= scale:
            raise RankvecDataError(f"gold score {gold} outside [0, {scale}]", path=p, row=line_no)
        try:
            pairs.append(ScoredPair.from_raw(row["sentence1"], row["sentence2"], gold, scale, len(pairs)))
        except ValidationError as exc:
            raise RankvecDataError("blank sentence", path=p, row=line_no) from exc
    if not pairs:
        raise RankvecDataError("dataset has no pairs", path=p)
    logger.info("sts_read", path=str(p), pairs=len(pairs), scale=scale)
    return pairs


def write_sts(rows: Sequence[tuple[str, str, float]], path: str | Path) -> None:
    """Write pairs in the dataset format (LF endings, no header)."""
    frame = pl.DataFrame(
        [list(r) for r in rows],
        schema={"sentence1": pl.Utf8, "sentence2": pl.Utf8, "gold": pl.Float64},
        orient="row",
    )
    frame.write_csv(
        path,
        separator="\t",
        include_header=False,
        quote_style="never",
        line_terminator="\n",
        float_precision=3,
    )


def scored_frame(pairs: Sequence[ScoredPair]) -> pl.DataFrame:
    """Per-pair predictions as a ``sentence1, sentence2, predicted`` frame."""
    if any(p.predicted is None for p in pairs):
        raise RankvecUsageError("every pair needs a prediction")
    return pl.DataFrame(
        {
            "sentence1": [p.s1.text for p in pairs],
            "sentence2": [p.s2.text for p in pairs],
            "predicted": [p.predicted for p in pairs],
        },
        schema={"sentence1": pl.Utf8, "sentence2": pl.Utf8, "predicted": pl.Float64},
    )
