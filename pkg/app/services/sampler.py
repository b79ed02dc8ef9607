"""
Deterministic sampling service.

Sample i of a run draws from its own generator, seeded by
SeedSequence(seed, spawn_key=(i,)), so every sample is a function of
(seed, i) alone. Indices are cut into chunks of CHUNK_SIZE and
handed to a process pool; results come back in index order whatever the
worker count.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterator, List, Optional, Tuple, Union

import numpy as np

from app.core.errors import InvalidModelParamsError
from app.core.gluing import ModelParams, SurfaceSummary, build_instance, summarize
from app.core.run_config import load_run_defaults
from app.monitoring.metrics import get_run_metrics_instance

logger = logging.getLogger(__name__)

SampleFn = Callable[[ModelParams, int, int], Any]


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample `index` of the run seeded by `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def resolve_threads(threads: Union[int, str, None]) -> int:
    """0, None or "auto" mean one worker per CPU."""
    if threads is None or threads == "auto":
        threads = 0
    threads = int(threads)
    if threads < 0:
        raise InvalidModelParamsError(f"Worker count must be nonnegative, got {threads}")
    return threads or os.cpu_count() or 1


def sample_summary(params: ModelParams, seed: int, index: int) -> SurfaceSummary:
    return summarize(build_instance(params, substream(seed, index)))


def sample_record(params: ModelParams, seed: int, index: int) -> dict:
    return sample_summary(params, seed, index).as_record(params, seed, index)


def _run_chunk(task: Tuple[ModelParams, int, int, int, SampleFn]) -> Tuple[List[Any], float]:
    params, seed, start, stop, fn = task
    began = time.perf_counter()
    results = [fn(params, seed, i) for i in range(start, stop)]
    return results, time.perf_counter() - began


def map_instances(
    params: ModelParams,
    samples: int,
    seed: int,
    fn: SampleFn = sample_summary,
    threads: Union[int, str, None] = 1,
    chunk_size: Optional[int] = None,
) -> Iterator[Any]:
    """
    Apply fn(params, seed, i) for i in 0..samples-1, yielding in index order.

    Args:
        params: validated model
        samples: number of indices
        seed: master seed
        fn: module-level callable (it is pickled for worker processes)
        threads: worker count; 1 runs in-process
        chunk_size: indices per task (defaults to the run defaults)
    """
    size = chunk_size or load_run_defaults().chunk_size
    tasks = [
        (params, seed, start, min(start + size, samples), fn)
        for start in range(0, samples, size)
    ]
    workers = resolve_threads(threads)
    metrics = get_run_metrics_instance()
    logger.debug("Sampling - model: %s, samples: %d, workers: %d, chunks: %d", params, samples, workers, len(tasks))

    if workers == 1 or len(tasks) <= 1:
        for task in tasks:
            results, duration = _run_chunk(task)
            metrics.record_chunk(len(results), duration)
            yield from results
        return

    with ProcessPoolExecutor(max_workers=workers) as pool:
        for results, duration in pool.map(_run_chunk, tasks):
            metrics.record_chunk(len(results), duration)
            yield from results
