"""
Logging setup shared by all layers
"""
import logging

from relkernel.config import Config

_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
_configured = False


def _configure_root():
    global _configured
    if _configured:
        return
    root = logging.getLogger("relkernel")
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt="%H:%M:%S"))
        root.addHandler(handler)
    root.setLevel(Config.LOG_LEVEL)
    root.propagate = False
    _configured = True


def get_logger(name):
    """Return a logger under the package namespace"""
    _configure_root()
    if not name.startswith("relkernel"):
        name = f"relkernel.{name}"
    return logging.getLogger(name)


def set_level(level):
    """Change the package log level at runtime (used by run.py --verbose)"""
    _configure_root()
    logging.getLogger("relkernel").setLevel(level)
