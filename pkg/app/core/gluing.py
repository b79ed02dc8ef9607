"""
Random surface models built by gluing polygon sides.

Features:
- ModelParams validation for T, T', S, S' (t-gon generalization for T/T')
- build_instance() samples one glued complex; assemble_instance() builds it
  from an explicit matching and boundary placement (used by the oracle)
- boundary_walk(), vertex_classes(), connected_components(), summarize()
- gamma_of() / boundary_shortcut(): the γ = α∘β reading for primed models

Every model is held as a full combinatorial map: a rotation σ on all N+m
sides (matched darts 1..N, boundary sides N+1..N+m) plus the matching β on
darts 1..N. Corner k sits at the tail of side k, i.e. between σ⁻¹(k) and k.
Gluing s to β(s) reverses orientation, which identifies corner s with corner
σ(β(s)). For T'/S', an insertion at corner k is a boundary side placed right
before dart k, so γ-cycles and vertex classes line up label for label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from app.core.errors import (
    InvalidModelParamsError,
    InvariantViolation,
    ShortcutInapplicableError,
    GluingError,
)
from app.core.permutation import (
    Matching,
    Permutation,
    canonical_rotation,
    compose,
    cycles,
    rotation_from_sequence,
    sample_matching,
)

logger = logging.getLogger(__name__)


class ModelKind(str, Enum):
    T = "t"
    TPRIME = "tprime"
    S = "s"
    SPRIME = "sprime"

    @property
    def primed(self) -> bool:
        return self in (ModelKind.TPRIME, ModelKind.SPRIME)

    @property
    def polygon_family(self) -> bool:
        """True for the many-polygon models T and T'."""
        return self in (ModelKind.T, ModelKind.TPRIME)


@dataclass(frozen=True)
class ModelParams:
    """
    Size parameters of a model.

    n counts polygons for T/T' and ordinary edges for S/S'; m counts
    boundary edges; t is the polygon size for T/T'.
    """

    kind: ModelKind
    n: int
    m: int = 0
    t: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        self.validate()

    def validate(self) -> None:
        kind, n, m, t = self.kind, self.n, self.m, self.t
        if n < 1:
            raise InvalidModelParamsError(f"n must be positive, got {n}")
        if m < 0:
            raise InvalidModelParamsError(f"m must be nonnegative, got {m}")
        if t < 3:
            raise InvalidModelParamsError(f"Polygons need t >= 3 sides, got t={t}")
        if kind.polygon_family:
            if (t * n) % 2:
                raise InvalidModelParamsError(f"t*n must be even to match all sides, got {t}*{n}")
            if kind is ModelKind.T and m > n:
                raise InvalidModelParamsError(f"T needs m <= n boundary polygons, got m={m}, n={n}")
            if kind is ModelKind.TPRIME and m > t * n:
                raise InvalidModelParamsError(f"T' needs m <= t*n corners, got m={m}, t*n={t * n}")
        else:
            if n % 2:
                raise InvalidModelParamsError(f"S models need an even edge count, got n={n}")
            if kind is ModelKind.SPRIME and m > n:
                raise InvalidModelParamsError(f"S' needs m <= n corners, got m={m}, n={n}")

    @property
    def N(self) -> int:
        """Matched dart count."""
        return self.t * self.n if self.kind.polygon_family else self.n

    @property
    def sides(self) -> int:
        """All polygon sides, matched and boundary."""
        return self.N + self.m

    @property
    def faces(self) -> int:
        return self.n if self.kind.polygon_family else 1

    def __str__(self) -> str:
        suffix = f", t={self.t}" if self.kind.polygon_family else ""
        return f"{self.kind.value}(n={self.n}, m={self.m}{suffix})"


@dataclass(frozen=True, eq=False)
class GluingInstance:
    """One sampled complex. Labels in free_darts / insertions are 1-based."""

    params: ModelParams
    rotation: Permutation
    matching: Matching
    free_darts: FrozenSet[int]
    insertions: FrozenSet[int]
    polygon_of: np.ndarray = field(repr=False)
    insertion_corners: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def M(self) -> int:
        return self.params.sides

    @cached_property
    def corner_labels(self) -> Tuple[int, np.ndarray]:
        """
        Vertex class of every corner, by union-find over glued corners.

        Returns:
            (class count, label per corner)
        """
        N, M = self.N, self.M
        dst = self.rotation.images[self.matching.partner]
        graph = csr_matrix(
            (np.ones(N, dtype=np.int8), (np.arange(N), dst)), shape=(M, M)
        )
        count, labels = _csgraph_components(graph, directed=False)
        return int(count), labels


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """
    Boundary circuits. `successor[j]` is the free side that follows free
    side N+j along the boundary (0-based offsets into the free sides).
    """

    successor: np.ndarray = field(repr=False)
    side_labels: np.ndarray = field(repr=False)
    total_boundary_vertices: int

    @cached_property
    def _decomposition(self):
        return Permutation._trusted(self.successor).decomposition if len(self.successor) else None

    @property
    def B(self) -> int:
        return self._decomposition.count if self._decomposition is not None else 0

    @cached_property
    def cycles(self) -> List[Tuple[int, ...]]:
        """Circuits as 1-based free side labels (insertion corners for T'/S')."""
        if self._decomposition is None:
            return []
        labels = self.side_labels.tolist()
        return [tuple(labels[j - 1] for j in cycle) for cycle in self._decomposition.cycles]


@dataclass(frozen=True)
class SurfaceSummary:
    B: int
    I: int
    genus: int
    chi: int
    components: int
    connected: bool
    faces: int
    edges: int
    vertices: int
    boundary_vertices: int

    def as_record(self, params: ModelParams, seed: int, index: int) -> Dict[str, Any]:
        """Fixed-order record for JSONL output."""
        return {
            "model": params.kind.value,
            "n": params.n,
            "m": params.m,
            "t": params.t,
            "seed": seed,
            "index": index,
            "B": self.B,
            "I": self.I,
            "genus": self.genus,
            "chi": self.chi,
            "components": self.components,
            "connected": self.connected,
        }


# =========================================================================
# Construction
# =========================================================================


def assemble_instance(
    params: ModelParams,
    matching: Matching,
    placement: Optional[Iterable[int]] = None,
) -> GluingInstance:
    """
    Build an instance from an explicit matching and boundary placement.

    Args:
        params: validated model parameters
        matching: β on the N matched darts
        placement: 0-based insertion corners (T'/S'), 0-based boundary
            positions among the n+m polygon slots (S), ignored for T

    Returns:
        GluingInstance
    """
    kind, n, m, t, N = params.kind, params.n, params.m, params.t, params.N
    if matching.N != N:
        raise GluingError(f"Matching has {matching.N} darts, model needs {N}")
    chosen = np.sort(np.asarray(list(placement) if placement is not None else [], dtype=np.int64))
    free_labels = np.arange(N, N + m, dtype=np.int64)
    insertion_corners = np.empty(0, dtype=np.int64)

    if kind.primed:
        if len(chosen) != m or len(np.unique(chosen)) != m or (m and (chosen[0] < 0 or chosen[-1] >= N)):
            raise GluingError(f"Need {m} distinct insertion corners in 0..{N - 1}")
        # each boundary side goes right before the dart whose tail corner it splits
        order = np.insert(np.arange(N, dtype=np.int64), chosen, free_labels)
        if kind is ModelKind.TPRIME:
            lengths = t + np.bincount(chosen // t, minlength=n)
            polygon_of = np.concatenate([np.arange(N) // t, chosen // t])
        else:
            lengths = [N + m]
            polygon_of = np.zeros(N + m, dtype=np.int64)
        insertion_corners = chosen
    elif kind is ModelKind.S:
        if len(chosen) != m or len(np.unique(chosen)) != m or (m and (chosen[0] < 0 or chosen[-1] >= n + m)):
            raise GluingError(f"Need {m} distinct boundary positions in 0..{n + m - 1}")
        is_free = np.zeros(n + m, dtype=bool)
        is_free[chosen] = True
        order = np.empty(n + m, dtype=np.int64)
        order[~is_free] = np.arange(N)
        order[is_free] = free_labels
        lengths = [n + m]
        polygon_of = np.zeros(N + m, dtype=np.int64)
    else:
        # first m polygons carry one boundary side, last in clockwise order
        order = np.insert(np.arange(N, dtype=np.int64), (np.arange(m) + 1) * t, free_labels)
        lengths = [t + 1] * m + [t] * (n - m)
        polygon_of = np.concatenate([np.arange(N) // t, np.arange(m)])

    rotation = Permutation._trusted(rotation_from_sequence(order, lengths))
    polygon_of = np.asarray(polygon_of, dtype=np.int64)
    polygon_of.setflags(write=False)
    insertion_corners.setflags(write=False)
    return GluingInstance(
        params=params,
        rotation=rotation,
        matching=matching,
        free_darts=frozenset() if kind.primed else frozenset(range(N + 1, N + m + 1)),
        insertions=frozenset((insertion_corners + 1).tolist()),
        polygon_of=polygon_of,
        insertion_corners=insertion_corners,
    )


def build_instance(params: ModelParams, stream: np.random.Generator) -> GluingInstance:
    """Sample a uniform matching, then an independent uniform boundary placement."""
    matching = sample_matching(params.N, stream)
    if params.kind.primed:
        placement = stream.choice(params.N, size=params.m, replace=False)
    elif params.kind is ModelKind.S:
        placement = stream.choice(params.n + params.m, size=params.m, replace=False)
    else:
        placement = None
    return assemble_instance(params, matching, placement)


# =========================================================================
# Analysis
# =========================================================================


def gamma_of(instance: GluingInstance) -> Permutation:
    """γ = α∘β on the matched darts, α the canonical rotation."""
    params = instance.params
    if not params.kind.primed and params.m > 0:
        raise ShortcutInapplicableError(
            f"γ does not describe boundary placement for {params}; use boundary_walk()"
        )
    if params.kind.polygon_family:
        alpha = canonical_rotation(n=params.n, t=params.t)
    else:
        alpha = canonical_rotation(N=params.N)
    return compose(alpha, instance.matching.as_permutation())


def boundary_shortcut(gamma: Permutation, insertions: Iterable[int]) -> Tuple[int, int]:
    """
    Read boundary components and internal vertices off γ.

    Args:
        gamma: α∘β
        insertions: 1-based corners carrying an inserted boundary edge

    Returns:
        (B, I): γ-cycles meeting the insertions, and the others
    """
    corners = np.asarray(sorted(insertions), dtype=np.int64) - 1
    if len(corners) and (corners[0] < 0 or corners[-1] >= gamma.N):
        raise GluingError(f"Insertion corners must lie in 1..{gamma.N}")
    decomposition = cycles(gamma)
    b_count = int(len(np.unique(decomposition.minima[corners])))
    return b_count, decomposition.count - b_count


def boundary_walk(instance: GluingInstance) -> BoundaryTrace:
    """
    Trace the boundary circuits.

    From each free side, step to the corner at its head and keep hopping
    across glued darts until the next free side. Each such run of corners is
    one vertex class (a path in the corner graph ending at exactly one free
    corner), so the hop sequence is read off the class labels.
    """
    N, M = instance.N, instance.M
    count, labels = instance.corner_labels
    free = np.arange(N, M, dtype=np.int64)
    if instance.params.kind.primed:
        side_labels = instance.insertion_corners + 1
    else:
        side_labels = free + 1
    if len(free) == 0:
        return BoundaryTrace(successor=free, side_labels=side_labels, total_boundary_vertices=0)

    end_of = np.full(count, -1, dtype=np.int64)
    end_of[labels[free]] = free
    heads = instance.rotation.images[free]
    successor = end_of[labels[heads]] - N
    boundary_vertices = int(len(np.unique(labels[free])))
    return BoundaryTrace(
        successor=successor,
        side_labels=side_labels,
        total_boundary_vertices=boundary_vertices,
    )


def vertex_classes(instance: GluingInstance) -> Tuple[int, int]:
    """
    Count vertex classes of the glued complex.

    Returns:
        (internal, boundary): classes with no corner next to a boundary
        side, and classes with one
    """
    N, M = instance.N, instance.M
    count, labels = instance.corner_labels
    free = np.arange(N, M, dtype=np.int64)
    touching = np.concatenate([labels[free], labels[instance.rotation.images[free]]])
    boundary = int(len(np.unique(touching)))
    return count - boundary, boundary


def connected_components(instance: GluingInstance) -> int:
    """Components of the polygon graph whose edges are the glued pairs."""
    params = instance.params
    if not params.kind.polygon_family:
        return 1
    darts = np.arange(params.N)
    poly = instance.polygon_of
    graph = csr_matrix(
        (np.ones(params.N, dtype=np.int8), (poly[darts], poly[instance.matching.partner])),
        shape=(params.n, params.n),
    )
    count, _ = _csgraph_components(graph, directed=False)
    return int(count)


def summarize(instance: GluingInstance) -> SurfaceSummary:
    """Euler characteristic bookkeeping for one instance."""
    params = instance.params
    internal, boundary = vertex_classes(instance)
    faces = params.faces
    edges = params.N // 2 + params.m
    vertices = internal + boundary
    chi = faces - edges + vertices
    b_count = boundary_walk(instance).B
    components = connected_components(instance)
    twice_genus = 2 * components - b_count - chi
    if twice_genus < 0 or twice_genus % 2:
        raise InvariantViolation(
            f"Non-integer genus for {params}: chi={chi}, B={b_count}, components={components}"
        )
    return SurfaceSummary(
        B=b_count,
        I=internal,
        genus=twice_genus // 2,
        chi=chi,
        components=components,
        connected=components == 1,
        faces=faces,
        edges=edges,
        vertices=vertices,
        boundary_vertices=boundary,
    )
