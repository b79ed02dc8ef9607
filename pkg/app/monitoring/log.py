import logging
import sys
from typing import Optional

from app.config import settings


def configure_logging(level: Optional[str] = None) -> None:
    """Send diagnostics to stderr so stdout stays machine-readable."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel((level or settings.LOG_LEVEL).upper())
