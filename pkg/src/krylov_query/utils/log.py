"""Logging setup driven by the KQ_LOG environment variable."""
import logging
import os
import sys

_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_ROOT = "krylov_query"
_configured = False


def _configure() -> None:
    global _configured
    if _configured:
        return
    level = _LEVELS.get(os.environ.get("KQ_LOG", "info").strip().lower(), logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger(_ROOT)
    root.addHandler(handler)
    root.setLevel(level)
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Get a module logger below the package root logger.

    Args:
        name: Usually ``__name__`` of the calling module

    Returns:
        Configured logger
    """
    _configure()
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
