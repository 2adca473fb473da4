"""Logging configuration for CopulaTune."""

import logging
import sys
from pathlib import Path
from typing import Optional

from app.core.config import LoggingConfig

ROOT_LOGGER = "app"


def setup_logging(
    config: Optional[LoggingConfig] = None,
    log_file: Optional[str] = None,
    level: Optional[str] = None
) -> logging.Logger:
    """
    Configure application logging.

    Args:
        config: Logging settings (code defaults if None)
        log_file: Optional log file path. If None, logs only to console.
        level: Optional level overriding the configured one

    Returns:
        Configured logger instance
    """
    config = config or LoggingConfig()
    log_level = getattr(logging, (level or config.log_level).upper(), logging.INFO)

    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(log_level)

    # Remove existing handlers
    logger.handlers.clear()

    formatter = logging.Formatter(config.log_format)

    # Console handler on stderr: stdout carries CSV output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    # Prevent propagation to root logger
    logger.propagate = False

    return logger

