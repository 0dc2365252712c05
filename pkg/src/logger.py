"""
Logging utilities for xbranch.

The stdlib logger `xbranch` owns the handlers (console on stderr, optional
rotating file); structlog sits on top of it so call sites log events with
key/value context: `logger.info("epoch finished", epoch=3, loss=0.12)`.
"""

import logging
import logging.handlers
import sys

import structlog

from .config import config

LOGGER_NAME = 'xbranch'


def _level(name) -> int:
    level = logging.getLevelName(str(name).upper())
    return level if isinstance(level, int) else logging.INFO


def setup_logging(settings=None):
    """Setup logging configuration based on config."""
    settings = settings or config
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(_level(settings.get('logging.level', 'INFO')))

    # Remove existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # stdout is reserved for command output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if settings.get('logging.file'):
        file_handler = logging.handlers.RotatingFileHandler(
            settings.get('logging.file'),
            maxBytes=settings.get('logging.max_file_size', 10485760),
            backupCount=settings.get('logging.backup_count', 5)
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.processors.KeyValueRenderer(key_order=['event'], sort_keys=True),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )
    return logger


def get_logger(name: str = None):
    """Structured logger writing through a child of the `xbranch` logger."""
    if name:
        return structlog.get_logger(f"{LOGGER_NAME}.{name.rsplit('.', 1)[-1]}")
    return structlog.get_logger(LOGGER_NAME)


def reload_logger(settings=None):
    """Reload logger configuration (useful when config changes)."""
    global logger
    setup_logging(settings)
    logger = get_logger()
    return logger


setup_logging()

# Global logger instance
logger = get_logger()
