"""Exception hierarchy shared by every rankvec module.

Three failure families map one-to-one onto CLI exit codes:

* :class:`RankvecUsageError` -- the caller asked for something invalid
  (shape mismatch, ``k`` out of range, config violation).  Exit code 1.
* :class:`RankvecDomainError` -- the inputs are well-formed but the result
  is mathematically undefined (zero-norm vector, all-tied ranks, constant
  gold scores).  Exit code 2.
* :class:`RankvecDataError` -- a file or persisted artifact is malformed,
  truncated, or belongs to a different encoder.  Exit code 2.
"""

from __future__ import annotations

from pathlib import Path


class RankvecError(Exception):
    """Base class for all rankvec failures."""

    code: str = "error"
    exit_code: int = 2


class RankvecUsageError(RankvecError):
    """Invalid arguments or configuration."""

    code = "usage"
    exit_code = 1


class RankvecDomainError(RankvecError):
    """Result undefined for the given (valid) inputs."""

    code = "domain"
    exit_code = 2


class RankvecDataError(RankvecError):
    """Malformed input data or persisted artifact."""

    code = "data"
    exit_code = 2

    def __init__(
        self,
        message: str,
        *,
        path: str | Path | None = None,
        row: int | None = None,
    ) -> None:
        self.path = None if path is None else str(path)
        self.row = row
        parts = [message]
        if row is not None:
            parts.append(f"row={row}")
        if self.path is not None:
            parts.append(f"path={self.path}")
        super().__init__(" ".join(parts))
