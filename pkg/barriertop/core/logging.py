import logging
from typing import Optional

from barriertop.core.config import settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> logging.Logger:
    """Attach a single stream handler to the package logger."""
    logger = logging.getLogger("barriertop")
    logger.setLevel((level or settings.LOG_LEVEL).upper())
    if not any(getattr(h, "_barriertop", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._barriertop = True
        logger.addHandler(handler)
    return logger
