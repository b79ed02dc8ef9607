import numpy as np
import pytest

from app.core.gluing import ModelKind, ModelParams
from app.monitoring import run_logger


@pytest.fixture
def stream():
    return np.random.Generator(np.random.PCG64(12345))


@pytest.fixture(autouse=True)
def in_memory_ledger(monkeypatch):
    """Keep the run ledger off disk during tests."""
    monkeypatch.setattr(run_logger, "_run_logger", run_logger.RunLogger(log_file=""))


@pytest.fixture
def small_models():
    return [
        ModelParams(ModelKind.T, 4, 2, 3),
        ModelParams(ModelKind.T, 6, 3, 4),
        ModelParams(ModelKind.TPRIME, 4, 3, 3),
        ModelParams(ModelKind.TPRIME, 3, 5, 4),
        ModelParams(ModelKind.S, 6, 3),
        ModelParams(ModelKind.SPRIME, 8, 4),
    ]
