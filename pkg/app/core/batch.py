"""
Vectorized sampler for all four models.

Draws many samples at once as (rows, darts) arrays. For T'/S' it reads B
and I off γ = α∘β exactly as boundary_shortcut() does for one instance.
For T/S with boundary it uses the corner map h = σ∘β̂ on all N+m sides,
β̂ being β extended by the identity on boundary sides: h-cycles through a
boundary side are boundary circuits, the others are internal vertices.
Results agree with summarize() in distribution; this path serves the
statistical checks where per-instance sampling is too slow.

Rows are produced in fixed-size chunks, each seeded from (seed, chunk), so a
given (params, samples, seed) always yields the same columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from app.config import settings
from app.core.errors import InvariantViolation, UnsupportedModelError
from app.core.gluing import ModelKind, ModelParams
from app.core.permutation import canonical_rotation, rotation_from_sequence, sample_matchings_batch


@dataclass(frozen=True)
class BatchSummary:
    """Column-wise summaries, one entry per sample."""

    B: np.ndarray
    I: np.ndarray
    genus: np.ndarray
    chi: np.ndarray
    components: np.ndarray
    cycle_count: np.ndarray

    @property
    def connected(self) -> np.ndarray:
        return self.components == 1

    def __len__(self) -> int:
        return int(self.B.shape[0])

    @classmethod
    def concat(cls, parts: List["BatchSummary"]) -> "BatchSummary":
        return cls(**{
            name: np.concatenate([getattr(p, name) for p in parts])
            for name in ("B", "I", "genus", "chi", "components", "cycle_count")
        })


def _alpha(params: ModelParams) -> np.ndarray:
    if params.kind.polygon_family:
        return canonical_rotation(n=params.n, t=params.t).images
    return canonical_rotation(N=params.N).images


def _distinct_per_row(values: np.ndarray) -> np.ndarray:
    if values.shape[1] == 0:
        return np.zeros(values.shape[0], dtype=np.int64)
    ordered = np.sort(values, axis=1)
    return 1 + (np.diff(ordered, axis=1) != 0).sum(axis=1)


def _block_components(src: np.ndarray, dst: np.ndarray, width: int, directed: bool) -> Tuple[np.ndarray, np.ndarray]:
    """
    Component label per node and component count per row.

    Row r of the edge arrays lives on nodes r*width .. (r+1)*width - 1 of one
    block-diagonal sparse graph, so no component crosses rows. With
    directed=True the components are strong ones, which for a permutation
    are exactly its cycles.
    """
    rows = src.shape[0]
    total = rows * width
    offset = (np.arange(rows, dtype=np.int64) * width)[:, np.newaxis]
    graph = csr_matrix(
        (np.ones(src.size, dtype=np.int8), ((offset + src).ravel(), (offset + dst).ravel())),
        shape=(total, total),
    )
    if directed:
        count, labels = _csgraph_components(graph, directed=True, connection="strong")
    else:
        count, labels = _csgraph_components(graph, directed=False)
    representative = np.empty(count, dtype=np.int64)
    representative[labels] = np.arange(total, dtype=np.int64)
    per_row = np.bincount(representative // width, minlength=rows)
    return labels.reshape(rows, width), per_row


def _cycle_labels(images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cycle labels and cycle counts for a (rows, M) stack of permutations."""
    positions = np.broadcast_to(np.arange(images.shape[1], dtype=np.int64), images.shape)
    return _block_components(positions, images, images.shape[1], directed=True)


def _polygon_components(partner: np.ndarray, n: int, t: int) -> np.ndarray:
    """Components of the polygon graph whose edges are the glued pairs, row by row."""
    polygons = np.broadcast_to(np.arange(partner.shape[1], dtype=np.int64) // t, partner.shape)
    _, per_row = _block_components(polygons, partner // t, n, directed=False)
    return per_row


def _random_subsets(rows: int, size: int, m: int, stream: np.random.Generator) -> np.ndarray:
    """Uniform m-subsets of range(size), one unsorted row each."""
    if m == size:
        return np.tile(np.arange(size, dtype=np.int64), (rows, 1))
    return np.argpartition(stream.random((rows, size)), m - 1, axis=1)[:, :m]


def _primed_cycles(params: ModelParams, partner: np.ndarray, stream: np.random.Generator):
    N, m = params.N, params.m
    rows = partner.shape[0]
    labels, cycle_count = _cycle_labels(_alpha(params)[partner])
    if m == 0:
        b_count = np.zeros(rows, dtype=np.int64)
    elif m == N:
        b_count = cycle_count.copy()
    else:
        corners = _random_subsets(rows, N, m, stream)
        b_count = _distinct_per_row(np.take_along_axis(labels, corners, axis=1))
    return b_count, cycle_count


def _boundary_layout(rows: int, slots: int, m: int, stream: np.random.Generator) -> np.ndarray:
    """Boundary-slot mask of an S polygon, a uniform m-subset of its slots per row."""
    is_free = np.zeros((rows, slots), dtype=bool)
    np.put_along_axis(is_free, _random_subsets(rows, slots, m, stream), True, axis=1)
    return is_free


def _boundary_rotations(params: ModelParams, rows: int, stream: np.random.Generator) -> np.ndarray:
    """σ on all N+m sides for T/S; one shared row for T, a random layout per row for S."""
    n, m, t, N = params.n, params.m, params.t, params.N
    free_labels = np.arange(N, N + m, dtype=np.int64)
    if params.kind is ModelKind.T:
        order = np.insert(np.arange(N, dtype=np.int64), (np.arange(m) + 1) * t, free_labels)
        return rotation_from_sequence(order, [t + 1] * m + [t] * (n - m))[np.newaxis, :]
    M = n + m
    is_free = _boundary_layout(rows, M, m, stream)
    order = np.where(is_free, N + np.cumsum(is_free, axis=1) - 1, np.cumsum(~is_free, axis=1) - 1)
    sigma = np.empty((rows, M), dtype=np.int64)
    np.put_along_axis(sigma, order, np.roll(order, -1, axis=1), axis=1)
    return sigma


def _bordered_cycles(params: ModelParams, partner: np.ndarray, stream: np.random.Generator):
    N, M = params.N, params.sides
    rows = partner.shape[0]
    sigma = _boundary_rotations(params, rows, stream)
    beta_hat = np.concatenate([partner, np.tile(np.arange(N, M, dtype=np.int64), (rows, 1))], axis=1)
    h = np.take_along_axis(np.broadcast_to(sigma, (rows, M)), beta_hat, axis=1)
    labels, cycle_count = _cycle_labels(h)
    return _distinct_per_row(labels[:, N:]), cycle_count


def batch_summaries(params: ModelParams, rows: int, stream: np.random.Generator) -> BatchSummary:
    """Sample `rows` independent summaries of any model with one generator."""
    N = params.N
    partner = sample_matchings_batch(N, rows, stream)
    if params.kind.primed or params.m == 0:
        b_count, cycle_count = _primed_cycles(params, partner, stream)
    else:
        b_count, cycle_count = _bordered_cycles(params, partner, stream)
    internal = cycle_count - b_count

    if params.kind.polygon_family:
        components = _polygon_components(partner, params.n, params.t)
    else:
        components = np.ones(rows, dtype=np.int64)

    chi = params.faces - N // 2 + internal
    twice_genus = 2 * components - b_count - chi
    if np.any(twice_genus < 0) or np.any(twice_genus % 2):
        raise InvariantViolation(f"Non-integer genus in vectorized batch for {params}")
    return BatchSummary(
        B=b_count,
        I=internal,
        genus=twice_genus // 2,
        chi=chi,
        components=components,
        cycle_count=cycle_count,
    )


def chunk_rows(params: ModelParams, element_limit: Optional[int] = None) -> int:
    limit = element_limit or settings.BATCH_ELEMENT_LIMIT
    return max(1, limit // params.sides)


def _chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def sample_batch(
    params: ModelParams,
    samples: int,
    seed: int,
    element_limit: Optional[int] = None,
) -> BatchSummary:
    """
    Deterministic vectorized sampling.

    Args:
        params: any validated model
        samples: total rows
        seed: master seed; chunk c draws from SeedSequence(seed, spawn_key=(c,))
        element_limit: rows x sides per chunk (defaults to settings)

    Returns:
        BatchSummary with `samples` rows
    """
    per_chunk = chunk_rows(params, element_limit)
    parts = []
    for chunk, start in enumerate(range(0, samples, per_chunk)):
        stream = _chunk_stream(seed, chunk)
        parts.append(batch_summaries(params, min(per_chunk, samples - start), stream))
    return BatchSummary.concat(parts)


def separated_layouts(
    params: ModelParams,
    samples: int,
    seed: int,
    element_limit: Optional[int] = None,
) -> np.ndarray:
    """
    For each S sample, whether no boundary side directly follows another
    around the polygon. Chunks and seeds as in sample_batch().
    """
    if params.kind is not ModelKind.S:
        raise UnsupportedModelError(f"Boundary layouts are drawn for S only, got {params}")
    per_chunk = chunk_rows(params, element_limit)
    parts = [np.zeros(0, dtype=bool)]
    for chunk, start in enumerate(range(0, samples, per_chunk)):
        is_free = _boundary_layout(
            min(per_chunk, samples - start), params.n + params.m, params.m, _chunk_stream(seed, chunk)
        )
        parts.append(~np.any(is_free & np.roll(is_free, -1, axis=1), axis=1))
    return np.concatenate(parts)
