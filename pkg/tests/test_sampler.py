import os

import pytest

from app.core.errors import InvalidModelParamsError
from app.core.gluing import ModelKind, ModelParams
from app.core.run_config import load_run_defaults
from app.monitoring.metrics import get_run_metrics_instance
from app.services.sampler import (
    map_instances,
    resolve_threads,
    sample_record,
    sample_summary,
    substream,
)

PARAMS = ModelParams(ModelKind.SPRIME, 20, 4)


def test_substreams_are_reproducible_and_distinct():
    assert substream(3, 5).integers(1 << 30) == substream(3, 5).integers(1 << 30)
    assert substream(3, 5).integers(1 << 30) != substream(3, 6).integers(1 << 30)


def test_sample_depends_only_on_seed_and_index():
    direct = sample_summary(PARAMS, 11, 7)
    streamed = list(map_instances(PARAMS, 10, 11))
    assert streamed[7] == direct


def test_chunking_does_not_change_results():
    a = list(map_instances(PARAMS, 25, 1, chunk_size=4))
    b = list(map_instances(PARAMS, 25, 1, chunk_size=100))
    assert a == b


def test_worker_pool_preserves_index_order():
    serial = list(map_instances(PARAMS, 30, 9, sample_record, threads=1, chunk_size=5))
    pooled = list(map_instances(PARAMS, 30, 9, sample_record, threads=2, chunk_size=5))
    assert pooled == serial
    assert [r["index"] for r in pooled] == list(range(30))


def test_chunks_are_recorded_in_metrics():
    before = get_run_metrics_instance().get_stats()["samples"]
    list(map_instances(PARAMS, 12, 0, chunk_size=5))
    assert get_run_metrics_instance().get_stats()["samples"] == before + 12


@pytest.mark.parametrize("value", [0, None, "auto"])
def test_resolve_threads_auto(value):
    assert resolve_threads(value) == (os.cpu_count() or 1)


def test_resolve_threads_explicit():
    assert resolve_threads(3) == 3
    assert resolve_threads("2") == 2
    with pytest.raises(InvalidModelParamsError):
        resolve_threads(-1)


def test_default_chunk_size_comes_from_run_defaults(monkeypatch):
    monkeypatch.setattr(load_run_defaults(), "chunk_size", 4)
    before = get_run_metrics_instance().get_stats()["chunks"]
    assert len(list(map_instances(PARAMS, 10, 0))) == 10
    assert get_run_metrics_instance().get_stats()["chunks"] == before + 3
