"""
app/utils/logger.py
───────────────────
Structured logging via structlog.

Console rendering in development, JSON lines otherwise. Logs go to stderr so
that CLI output on stdout (tables, JSON) stays pipeable. numpy scalars and
small arrays in event context are rendered as plain numbers and lists.

Usage:
    from app.utils.logger import bind_context, get_logger
    logger = get_logger(__name__)
    logger.info("Event name", key=value, ...)

    with bind_context(method="ST", herm=True):
        ...  # every event inside carries method/herm
"""

from __future__ import annotations

import json
import logging
import sys
from typing import Any, ContextManager

import numpy as np
import structlog

from app.core.config import settings

# arrays longer than this are summarized by shape
_MAX_LOGGED_ITEMS = 16


def _to_plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size > _MAX_LOGGED_ITEMS:
            return f"ndarray{value.shape}"
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return str(value)


def _plain_numbers(_, __, event_dict: dict) -> dict:
    for key, value in event_dict.items():
        if isinstance(value, (np.generic, np.ndarray)):
            event_dict[key] = _to_plain(value)
    return event_dict


def _dumps(obj: Any, **kw: Any) -> str:
    return json.dumps(obj, default=_to_plain, **kw)


def configure_logging() -> None:
    """Call once at startup."""
    log_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            _plain_numbers,
            structlog.dev.ConsoleRenderer()
            if settings.ENV == "development"
            else structlog.processors.JSONRenderer(serializer=_dumps),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )

    # uvicorn and scipy warnings go through stdlib logging
    logging.basicConfig(level=log_level, format="%(message)s", stream=sys.stderr)


configure_logging()


def get_logger(name: str) -> structlog.BoundLogger:
    return structlog.get_logger(name)


def bind_context(**context: Any) -> ContextManager[None]:
    """Binds key/value pairs to every event logged inside the block."""
    return structlog.contextvars.bound_contextvars(**context)
