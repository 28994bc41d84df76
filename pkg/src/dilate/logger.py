"""Structured JSON logging for dilate.

Every record becomes one JSON line on stderr. Fields passed through ``extra=``
are copied verbatim; numpy scalars and arrays are converted so that losses,
seeds and timings can be logged without manual casting.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import datetime

import numpy as np

_RESERVED = {
    "timestamp",
    "level",
    "module",
    "message",
    "name",
    "msg",
    "args",
    "created",
    "filename",
    "funcName",
    "levelname",
    "levelno",
    "lineno",
    "msecs",
    "pathname",
    "process",
    "processName",
    "relativeCreated",
    "stack_info",
    "thread",
    "threadName",
    "exc_info",
    "exc_text",
    "taskName",
}


def _to_jsonable(value: object) -> object:
    """Fallback encoder for values json cannot serialize natively."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


_state: dict[str, int] = {"level": logging.DEBUG}


class JsonFormatter(logging.Formatter):
    """Log formatter that outputs records as single-line JSON objects."""

    def format(self, record: logging.LogRecord) -> str:
        """Format a log record as JSON."""
        log: dict[str, object] = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "level": record.levelname,
            "module": record.module,
            "message": record.getMessage(),
        }
        for key, value in record.__dict__.items():
            if key not in _RESERVED:
                log[key] = value
        if record.exc_info:
            log["exception"] = self.formatException(record.exc_info)
        return json.dumps(log, ensure_ascii=False, default=_to_jsonable)


def configure_log_level(level: int) -> None:
    """Set the log level on all dilate loggers, including ones created later."""
    logging.getLogger("dilate").setLevel(level)
    for name in list(logging.Logger.manager.loggerDict):
        if name.startswith("dilate."):
            logging.getLogger(name).setLevel(level)
    _state["level"] = level


def get_logger(name: str) -> logging.Logger:
    """Return a logger writing JSON lines to stderr."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonFormatter())
        logger.addHandler(handler)
        logger.setLevel(_state["level"])
        logger.propagate = False
    return logger
