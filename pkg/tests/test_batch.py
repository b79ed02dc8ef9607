import numpy as np
import pytest

from app.core.batch import (
    BatchSummary,
    _boundary_layout,
    _boundary_rotations,
    _cycle_labels,
    batch_summaries,
    chunk_rows,
    sample_batch,
    separated_layouts,
)
from app.core.errors import UnsupportedModelError
from app.core.gluing import ModelKind, ModelParams
from app.core.oracle import exact_joint
from app.core.permutation import cycles, sample_uniform_permutation
from app.core.stats import tv_distance


def _projected_table(batch: BatchSummary):
    pairs = list(zip(batch.B.tolist(), batch.genus.tolist()))
    table = {}
    for key in pairs:
        table[key] = table.get(key, 0) + 1 / len(pairs)
    return table


def test_sample_batch_is_deterministic():
    params = ModelParams(ModelKind.SPRIME, 40, 6)
    a = sample_batch(params, 500, seed=7)
    b = sample_batch(params, 500, seed=7)
    assert len(a) == 500
    for name in ("B", "I", "genus", "chi", "components"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_sample_batch_chunks_cover_all_rows():
    params = ModelParams(ModelKind.TPRIME, 6, 3, 4)
    assert chunk_rows(params, element_limit=54) == 2
    batch = sample_batch(params, 11, seed=1, element_limit=54)
    assert len(batch) == 11


def test_ribbon_graphs_have_no_internal_vertices():
    batch = sample_batch(ModelParams(ModelKind.SPRIME, 30, 30), 300, seed=3)
    assert np.all(batch.I == 0)
    assert np.all(batch.B == batch.cycle_count)


@pytest.mark.parametrize(
    "params",
    [
        ModelParams(ModelKind.T, 4, 2, 3),
        ModelParams(ModelKind.T, 5, 5, 4),
        ModelParams(ModelKind.S, 10, 4),
        ModelParams(ModelKind.TPRIME, 6, 2, 3),
        ModelParams(ModelKind.SPRIME, 12, 12),
    ],
)
def test_euler_bookkeeping_holds_row_by_row(params, stream):
    batch = batch_summaries(params, 400, stream)
    assert np.all(batch.chi == 2 * batch.components - 2 * batch.genus - batch.B)
    assert np.all(batch.chi == params.faces - (params.N // 2 + params.m) + batch.I + params.m)
    assert np.all(batch.I >= 0)
    assert np.all(batch.B >= (1 if params.m else 0))
    assert np.all(batch.B <= params.m)


def test_single_polygon_models_report_one_component(stream):
    batch = batch_summaries(ModelParams(ModelKind.S, 8, 2), 50, stream)
    assert np.all(batch.connected)


@pytest.mark.parametrize(
    "params",
    [
        ModelParams(ModelKind.TPRIME, 2, 1, 3),
        ModelParams(ModelKind.S, 4, 1),
        ModelParams(ModelKind.T, 2, 1, 3),
        ModelParams(ModelKind.S, 4, 2),
    ],
)
def test_batch_agrees_with_exact_law(params):
    exact = {key: float(p) for key, p in exact_joint(params).projected().items()}
    empirical = _projected_table(sample_batch(params, 20000, seed=2024))
    assert tv_distance(empirical, exact) <= 0.03


def test_cycle_labels_match_single_permutations(stream):
    perms = [sample_uniform_permutation(25, stream) for _ in range(8)]
    labels, counts = _cycle_labels(np.stack([p.images for p in perms]))
    assert counts.tolist() == [cycles(p).count for p in perms]
    for row, p in zip(labels, perms):
        # same cycle <=> same label
        minima = cycles(p).minima
        assert np.array_equal(row[:, None] == row[None, :], minima[:, None] == minima[None, :])


def test_concat_preserves_order(stream):
    params = ModelParams(ModelKind.SPRIME, 10, 3)
    first = batch_summaries(params, 5, stream)
    second = batch_summaries(params, 7, stream)
    joined = BatchSummary.concat([first, second])
    assert len(joined) == 12
    assert np.array_equal(joined.B[5:], second.B)


def test_separated_layouts_match_cyclic_spacing_law():
    # 2 of 6 cyclic slots with no two adjacent: 6/4 * C(4, 2) / C(6, 2) = 3/5
    flags = separated_layouts(ModelParams(ModelKind.S, 4, 2), 20000, seed=8)
    assert flags.dtype == bool and len(flags) == 20000
    assert abs(flags.mean() - 0.6) <= 0.02


def test_separated_layouts_agree_with_rotation():
    params = ModelParams(ModelKind.S, 6, 3)
    stream = np.random.Generator(np.random.PCG64(5))
    is_free = _boundary_layout(200, params.n + params.m, params.m, np.random.Generator(np.random.PCG64(5)))
    sigma = _boundary_rotations(params, 200, stream)
    # a boundary side followed by another one under σ
    adjacent = np.any(sigma[:, params.N:] >= params.N, axis=1)
    assert np.array_equal(adjacent, np.any(is_free & np.roll(is_free, -1, axis=1), axis=1))


def test_separated_layouts_need_model_s():
    with pytest.raises(UnsupportedModelError):
        separated_layouts(ModelParams(ModelKind.SPRIME, 4, 2), 10, seed=0)
