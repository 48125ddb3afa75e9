"""Plain-text corpus ingestion: one sentence per line, UTF-8, LF or CRLF.

Blank lines are skipped with a warning; duplicates are kept and order is
preserved.  Kept lines receive consecutive sentence ids starting at 0, which
is also their row in any embedding matrix built from the corpus.
"""

from __future__ import annotations

from pathlib import Path

import structlog

from src.common.errors import RankvecDataError
from src.storage.models.sentence import Sentence

logger = structlog.get_logger(__name__)

MIN_CORPUS_SENTENCES = 2


def read_corpus(path: str | Path, *, min_sentences: int = MIN_CORPUS_SENTENCES) -> list[Sentence]:
    p = Path(path)
    if not p.is_file():
        raise RankvecDataError("corpus file not found", path=p)
    try:
        text = p.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        line_no = p.read_bytes()[: exc.start].count(b"\n") + 1
        raise RankvecDataError("corpus is not valid UTF-8", path=p, row=line_no) from exc

    sentences: list[Sentence] = []
    skipped = 0
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.removesuffix("\r")
        if not line.strip():
            skipped += 1
            logger.warning("corpus_blank_line_skipped", path=str(p), line=line_no)
            continue
        sentences.append(Sentence(text=line, id=len(sentences)))

    if len(sentences) < min_sentences:
        raise RankvecDataError(
            f"corpus has {len(sentences)} valid lines, at least {min_sentences} required", path=p
        )
    logger.info("corpus_read", path=str(p), sentences=len(sentences), blank_lines=skipped)
    return sentences
