"""
Logging setup shared by the library, the CLI and the helper scripts.

The CLI calls ``setup_logging`` once per process: run summaries and solver
diagnostics go to stdout in one format, errors are kept in a rotating
``error.log``. Library modules only hold ``logging.getLogger(__name__)``.

Environment:
    LOG_LEVEL         console level (default INFO)
    DEBUG             "true" forces DEBUG everywhere and enables debug.log
    LOG_DIR           directory of the log files (default ``logs``)
    ENABLE_DEBUG_LOG  "true" enables debug.log without DEBUG
"""

import logging
import logging.handlers
import os
import sys
from pathlib import Path
from typing import Optional

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
VERBOSE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(pathname)s:%(lineno)d - %(message)s'
DEFAULT_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

MAX_LOG_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 5

# chatty at DEBUG while rendering SVG
QUIET_LOGGERS = ('matplotlib', 'PIL')


def _flag(name: str) -> bool:
    return os.getenv(name, "False").lower() == "true"


def _level(name: Optional[str] = None) -> int:
    name = (name or os.getenv("LOG_LEVEL", "INFO")).upper()
    return getattr(logging, name, logging.INFO)


def _rotating_handler(path: Path, level: int) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(VERBOSE_FORMAT, datefmt=DEFAULT_DATE_FORMAT))
    return handler


def setup_logging(level_name: Optional[str] = None) -> logging.Logger:
    """
    Configure the root logger for a CLI run.

    Calling it again replaces the handlers installed by the previous call.

    Args:
        level_name: Level name from ``--log-level``; overrides ``LOG_LEVEL``.

    Returns:
        logging.Logger: The ``vakonomic`` logger
    """
    debug_mode = _flag("DEBUG")
    console_level = logging.DEBUG if debug_mode else _level(level_name)

    log_dir = Path(os.getenv("LOG_DIR", "logs"))
    log_dir.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    root.setLevel(console_level)

    console = logging.StreamHandler(sys.stdout)
    console.setLevel(console_level)
    console.setFormatter(logging.Formatter(DEFAULT_FORMAT, datefmt=DEFAULT_DATE_FORMAT))
    root.addHandler(console)
    root.addHandler(_rotating_handler(log_dir / "error.log", logging.ERROR))
    if debug_mode or _flag("ENABLE_DEBUG_LOG"):
        root.setLevel(logging.DEBUG)
        root.addHandler(_rotating_handler(log_dir / "debug.log", logging.DEBUG))

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logger = logging.getLogger('vakonomic')
    logger.info(f"Logging initialized with level {logging.getLevelName(console_level)}")
    return logger


def get_logger(name: Optional[str] = None, level: Optional[int] = None) -> logging.Logger:
    """
    Logger for code running outside the CLI (scripts, notebooks).

    A stdout handler is attached only when nothing upstream handles records yet.
    """
    logger = logging.getLogger(name or __name__)
    logger.setLevel(_level() if level is None else level)
    if not logger.handlers and not logging.getLogger().handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(DEFAULT_FORMAT, datefmt=DEFAULT_DATE_FORMAT))
        logger.addHandler(handler)
    return logger
