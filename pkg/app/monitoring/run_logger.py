"""
Run ledger for the gluing simulator.

Appends one JSONL record per CLI run for later auditing.
"""

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.config import settings

logger = logging.getLogger(__name__)


class RunLogger:
    """Logs runs to a JSONL file. An empty path keeps records in memory only."""

    def __init__(self, log_file: Optional[str] = None):
        self.log_file = settings.RUN_LOG_FILE if log_file is None else log_file
        if self.log_file:
            Path(self.log_file).parent.mkdir(parents=True, exist_ok=True)
        self._recent: List[Dict[str, Any]] = []

    def log_run(
        self,
        command: str,
        params: Dict[str, Any],
        duration: float,
        success: bool,
        error_message: Optional[str] = None,
    ):
        """Log a run to file and in-memory buffer."""
        entry = {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "command": command,
            **params,
            "duration": round(duration, 4),
            "success": success,
        }
        if error_message:
            entry["error"] = error_message

        if self.log_file:
            try:
                with open(self.log_file, "a") as f:
                    f.write(json.dumps(entry, default=str) + "\n")
            except OSError as e:
                logger.warning("Run ledger write failed - file: %s, error: %s", self.log_file, e)

        self._recent.append(entry)
        if len(self._recent) > 100:
            self._recent = self._recent[-100:]

    def get_recent_runs(self, n: int = 20) -> List[Dict[str, Any]]:
        """Get the last N logged runs."""
        return self._recent[-n:]


# Global instance
_run_logger = None


def get_run_logger() -> RunLogger:
    """Get global run logger instance."""
    global _run_logger
    if _run_logger is None:
        _run_logger = RunLogger()
    return _run_logger


def log_run(
    command: str,
    params: Dict[str, Any],
    duration: float,
    success: bool,
    error_message: Optional[str] = None,
) -> None:
    """Convenience function to log a run."""
    get_run_logger().log_run(command, params, duration, success, error_message)
