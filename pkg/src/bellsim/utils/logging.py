"""
Logging utilities for bellsim.

This module provides structured logging configuration, a JSON formatter for
log files, contextual log fields and performance timing.
"""

import logging
import logging.handlers
import os
import sys
import time
from datetime import datetime, timezone
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar

from pythonjsonlogger import jsonlogger

from .. import __version__
from ..core.config import BellSimSettings

F = TypeVar("F", bound=Callable[..., Any])

ROOT_LOGGER = "bellsim"


class StructuredFormatter(jsonlogger.JsonFormatter):
    """JSON formatter with package and process context."""

    def add_fields(
        self,
        log_record: Dict[str, Any],
        record: logging.LogRecord,
        message_dict: Dict[str, Any],
    ) -> None:
        """Add custom fields to log records."""
        super().add_fields(log_record, record, message_dict)

        log_record["timestamp"] = datetime.now(timezone.utc).isoformat()
        log_record["package"] = ROOT_LOGGER
        log_record["version"] = __version__
        log_record["process_id"] = os.getpid()

        if hasattr(record, "thread"):
            log_record["thread_id"] = record.thread
            log_record["thread_name"] = record.threadName


def setup_logging(settings: BellSimSettings) -> None:
    """
    Setup logging configuration based on the provided settings.

    Console output goes to stderr; stdout carries command results.

    Args:
        settings: Runtime settings
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.handlers.clear()

    log_level = getattr(logging, settings.log_level.value)
    logger.setLevel(logging.DEBUG if settings.log_file else log_level)

    if settings.debug_mode:
        console_formatter = logging.Formatter(
            "%(asctime)s [%(name)s] %(levelname)s %(filename)s:%(lineno)d - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    else:
        console_formatter = logging.Formatter(
            "%(asctime)s [%(levelname)s] %(name)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(console_formatter)
    console_handler.setLevel(log_level)
    logger.addHandler(console_handler)

    if settings.log_file:
        try:
            log_path = Path(settings.log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)

            file_handler = logging.handlers.RotatingFileHandler(
                settings.log_file,
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=5,
                encoding="utf-8",
            )
            file_handler.setFormatter(
                StructuredFormatter("%(timestamp)s %(name)s %(levelname)s %(message)s")
            )
            file_handler.setLevel(logging.DEBUG)
            logger.addHandler(file_handler)

        except OSError as e:
            logger.warning(f"Failed to setup file logging: {e}")

    logger.propagate = False

    logger.debug(
        f"Logging configured: level={settings.log_level.value}, debug={settings.debug_mode}"
    )


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the bellsim namespace.

    Args:
        name: Logger name (usually __name__)
    """
    if not name.startswith(ROOT_LOGGER):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)


class LogContext:
    """Context manager for adding contextual fields to every log record."""

    def __init__(self, **context: Any):
        self.context = context
        self.old_factory: Optional[Callable[..., logging.LogRecord]] = None

    def __enter__(self) -> "LogContext":
        self.old_factory = logging.getLogRecordFactory()
        old_factory = self.old_factory

        def record_factory(*args: Any, **kwargs: Any) -> logging.LogRecord:
            record = old_factory(*args, **kwargs)
            for key, value in self.context.items():
                setattr(record, key, value)
            return record

        logging.setLogRecordFactory(record_factory)
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self.old_factory:
            logging.setLogRecordFactory(self.old_factory)


class PerformanceLogger:
    """Logger for operation timings."""

    def __init__(self, logger_name: str = "bellsim.performance"):
        self.logger = get_logger(logger_name)

    def log_operation_time(
        self,
        operation: str,
        duration: float,
        success: bool = True,
        **metadata: Any,
    ) -> None:
        """Log operation timing information."""
        self.logger.info(
            f"Operation {operation}: {duration:.3f}s",
            extra={
                "operation": operation,
                "duration_seconds": duration,
                "success": success,
                "metadata": metadata,
                "metric_type": "operation_time",
            },
        )


performance_logger = PerformanceLogger()


def log_performance(operation: str) -> Callable[[F], F]:
    """Decorator for logging operation wall time."""

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start_time = time.perf_counter()
            success = True
            try:
                return func(*args, **kwargs)
            except Exception:
                success = False
                raise
            finally:
                performance_logger.log_operation_time(
                    operation,
                    time.perf_counter() - start_time,
                    success,
                    function=func.__name__,
                )

        return wrapper  # type: ignore[return-value]

    return decorator
