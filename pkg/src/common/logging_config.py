"""Structured JSON logging for rankvec commands and library code.

Configures *structlog* to emit JSON lines on stderr so that CSV written to
stdout by the CLI stays machine-readable.  Every log event automatically
carries a run ID, the service name, the active subcommand, and an ISO-8601
timestamp.  A dedicated processor turns numpy scalars and small arrays into
plain Python values so ``JSONRenderer`` never chokes on ``np.int64``.
"""

from __future__ import annotations

import logging
import sys
import uuid
from collections.abc import Mapping, MutableMapping
from contextvars import ContextVar
from typing import Any

import numpy as np
import structlog

# --------------------------------------------------------------------------- #
# Run-ID context                                                               #
# --------------------------------------------------------------------------- #
_run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)
_service_name_ctx: ContextVar[str] = ContextVar("service_name", default="rankvec")
_command_ctx: ContextVar[str | None] = ContextVar("command", default=None)

_MAX_ARRAY_ITEMS = 16


def get_run_id() -> str:
    """Return the current run ID, creating one if absent."""
    rid = _run_id_ctx.get()
    if rid is None:
        rid = uuid.uuid4().hex
        _run_id_ctx.set(rid)
    return rid


def set_run_id(rid: str) -> None:
    """Explicitly set the run ID (e.g. derived from ``--seed`` for reproducible logs)."""
    _run_id_ctx.set(rid)


def set_command(command: str) -> None:
    """Tag every subsequent event with the CLI subcommand being executed."""
    _command_ctx.set(command)


# --------------------------------------------------------------------------- #
# Processors                                                                   #
# --------------------------------------------------------------------------- #
def _to_json_safe(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size > _MAX_ARRAY_ITEMS:
            return f"<ndarray shape={value.shape} dtype={value.dtype}>"
        return value.tolist()
    return value


def _coerce_numpy(
    logger: Any,
    method_name: str,
    event_dict: MutableMapping[str, Any],
) -> Mapping[str, Any]:
    """Structlog processor replacing numpy values with JSON-serialisable ones."""
    for key, value in list(event_dict.items()):
        event_dict[key] = _to_json_safe(value)
    return event_dict


def _inject_context(
    logger: Any,
    method_name: str,
    event_dict: MutableMapping[str, Any],
) -> Mapping[str, Any]:
    """Add run_id, service and command to every event."""
    event_dict.setdefault("run_id", get_run_id())
    event_dict.setdefault("service", _service_name_ctx.get())
    command = _command_ctx.get()
    if command is not None:
        event_dict.setdefault("command", command)
    return event_dict


# --------------------------------------------------------------------------- #
# Public setup function                                                        #
# --------------------------------------------------------------------------- #


def setup_logging(
    service_name: str = "rankvec",
    log_level: str = "INFO",
    run_id: str | None = None,
) -> structlog.stdlib.BoundLogger:
    """Configure structlog for JSON output on stderr.

    Parameters
    ----------
    service_name:
        Logical name attached to every event (``"rankvec"`` for the CLI).
    log_level:
        Standard Python log level string.  Defaults to ``"INFO"``.
    run_id:
        Optional fixed run identifier; a random one is generated otherwise.

    Returns
    -------
    structlog.stdlib.BoundLogger
        A pre-configured logger instance ready for use.
    """
    _service_name_ctx.set(service_name)
    if run_id is not None:
        set_run_id(run_id)
    level = getattr(logging, log_level.upper(), logging.INFO)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            _inject_context,
            _coerce_numpy,
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )

    logging.basicConfig(format="%(message)s", level=level, stream=sys.stderr, force=True)
    logger: structlog.stdlib.BoundLogger = structlog.get_logger(service_name)
    logger.debug("logging_initialised", log_level=log_level)
    return logger
