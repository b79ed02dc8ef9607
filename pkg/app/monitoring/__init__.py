"""Monitoring module - run metrics, run ledger and logging setup."""

from app.monitoring.log import configure_logging
from app.monitoring.metrics import get_run_metrics_instance
from app.monitoring.run_logger import get_run_logger, log_run

__all__ = ["configure_logging", "get_run_metrics_instance", "get_run_logger", "log_run"]
