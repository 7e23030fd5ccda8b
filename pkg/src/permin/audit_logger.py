"""
Audit Logger
============
Structured diagnostics and the audit envelope carried by every report.

Diagnostics are key=value events rendered by structlog on stderr, so that
stdout only ever carries the JSON result. Reports carry no wall-clock time:
the same config and seed give byte-identical reports.
"""

import hashlib
import logging
import os
import platform
import sys
from typing import Any, Dict, Optional

import numpy as np
import structlog

from . import __version__
from .serialization import dumps

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """
    Route structlog events to stderr.

    ``level`` defaults to PERMIN_LOG_LEVEL (else WARNING); ``fmt`` is
    "console" or "json" and defaults to PERMIN_LOG_FORMAT (else console).
    """
    level = (level or os.getenv("PERMIN_LOG_LEVEL") or "WARNING").upper()
    if level not in LOG_LEVELS:
        level = "WARNING"
    fmt = (fmt or os.getenv("PERMIN_LOG_FORMAT") or "console").lower()
    renderer = (structlog.processors.JSONRenderer(sort_keys=True) if fmt == "json"
                else structlog.dev.ConsoleRenderer(colors=False))
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def checksum(payload: Any) -> str:
    """sha256 of the canonical JSON form, first 16 hex digits."""
    return hashlib.sha256(dumps(payload).encode("utf-8")).hexdigest()[:16]


def versions() -> Dict[str, str]:
    return {
        "permin": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def envelope(command: str, config: Dict[str, Any], rng_seed: int,
             constants: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Audit fields shared by every report."""
    return {
        "command": command,
        "config_hash": checksum(config),
        "rng_seed": rng_seed,
        "versions": versions(),
        "constants": constants or {},
    }


def bind_run(command: str, config_hash: str) -> None:
    """Attach the run identity to every following log event."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, config_hash=config_hash)
