"""
Run metrics for the gluing simulator.

Tracks samples produced, chunk durations, throughput, failures and
per-command counts for the lifetime of the process.
"""

import logging
import time
from collections import defaultdict
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class RunMetrics:
    """In-memory metrics tracker."""

    WINDOW_SIZE = 1000

    def __init__(self):
        self._start_time = time.time()

        # Sampling
        self._samples = 0
        self._chunks = 0
        self._chunk_durations: List[float] = []

        # Commands
        self._commands: Dict[str, Dict[str, Any]] = defaultdict(
            lambda: {"runs": 0, "failures": 0, "durations": []}
        )

        # Failure categories (exception class names)
        self._error_categories: Dict[str, int] = defaultdict(int)

    def record_chunk(self, samples: int, duration: float):
        """Record one finished chunk of samples."""
        self._samples += samples
        self._chunks += 1
        self._chunk_durations.append(duration)
        if len(self._chunk_durations) > self.WINDOW_SIZE:
            self._chunk_durations = self._chunk_durations[-self.WINDOW_SIZE:]

    def record_command(
        self,
        command: str,
        duration: float,
        success: bool = True,
        error_category: Optional[str] = None,
    ):
        """Record a finished CLI command."""
        cmd = self._commands[command]
        cmd["runs"] += 1
        cmd["durations"].append(duration)
        if not success:
            cmd["failures"] += 1
        if error_category:
            self._error_categories[error_category] += 1

    def get_stats(self) -> Dict[str, Any]:
        uptime = time.time() - self._start_time
        busy = sum(self._chunk_durations)
        avg_chunk = busy / len(self._chunk_durations) if self._chunk_durations else 0.0
        throughput = self._samples / busy if busy > 0 else 0.0

        commands = {
            name: {
                "runs": data["runs"],
                "failures": data["failures"],
                "avg_duration": round(sum(data["durations"]) / len(data["durations"]), 4)
                if data["durations"] else 0.0,
            }
            for name, data in self._commands.items()
        }

        return {
            "samples": self._samples,
            "chunks": self._chunks,
            "avg_chunk_seconds": round(avg_chunk, 4),
            "samples_per_second": round(throughput, 1),
            "uptime_seconds": round(uptime, 1),
            "commands": commands,
            "errors": dict(self._error_categories),
        }

    def log_summary(self):
        stats = self.get_stats()
        logger.info(
            "Run metrics - samples: %d, chunks: %d, samples/s: %s, uptime: %ss",
            stats["samples"], stats["chunks"], stats["samples_per_second"], stats["uptime_seconds"],
        )


# Global instance
_run_metrics = None


def get_run_metrics_instance() -> RunMetrics:
    """Get global RunMetrics instance."""
    global _run_metrics
    if _run_metrics is None:
        _run_metrics = RunMetrics()
    return _run_metrics
