"""
Permutations on darts {1..N}.

Features:
- Permutation / Matching / CycleDecomposition value types (immutable)
- compose(), sign(), cycles(), min_indicator_process(), parity_fix()
- uniform samplers for matchings and permutations, single and batched
- canonical_rotation() for t-gon families and single polygons

Images are stored 0-based in read-only numpy arrays; every external format
(text, lists, JSON) is 1-based. Sampling takes an explicit
numpy Generator, there is no hidden global state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import GluingError, IncompatibleCarrierError, UnmatchableDartError

Parity = Literal["even", "odd"]

_CYCLE_RE = re.compile(r"\(([^()]*)\)")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64, copy=True)
    arr.setflags(write=False)
    return arr


def orbit_minima(images: np.ndarray) -> np.ndarray:
    """
    Smallest (0-based) label on the cycle through each position.

    Pointer doubling: after each round `low[k]` covers twice as many iterates
    of k and `jump` holds the matching power of the permutation, so
    ceil(log2 N) rounds cover every cycle. Works row-wise on a 2-D stack.
    """
    images = np.asarray(images, dtype=np.int64)
    n = images.shape[-1]
    low = np.broadcast_to(np.arange(n, dtype=np.int64), images.shape).copy()
    jump = images.copy()
    span = 1
    while span < n:
        low = np.minimum(low, np.take_along_axis(low, jump, axis=-1))
        jump = np.take_along_axis(jump, jump, axis=-1)
        span *= 2
    return low


def rotation_from_sequence(order: Sequence[int], lengths: Sequence[int]) -> np.ndarray:
    """
    Build the clockwise rotation for polygons listed back to back.

    Args:
        order: 0-based side labels, polygon after polygon, each clockwise
        lengths: number of sides of each polygon, in the same order

    Returns:
        0-based image array σ with σ(side) = next side clockwise
    """
    order = np.asarray(order, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    ends = np.cumsum(lengths)
    starts = ends - lengths
    following = np.arange(1, len(order) + 1, dtype=np.int64)
    following[ends - 1] = starts
    sigma = np.empty(len(order), dtype=np.int64)
    sigma[order] = order[following]
    return sigma


@dataclass(frozen=True, eq=False)
class CycleDecomposition:
    """Cycles of a permutation, keyed by their minimum element."""

    images: np.ndarray
    minima: np.ndarray

    @property
    def N(self) -> int:
        return int(self.images.shape[0])

    @cached_property
    def min_indicators(self) -> np.ndarray:
        """Bit k-1 is set iff k is the smallest label of its cycle."""
        bits = self.minima == np.arange(self.N, dtype=np.int64)
        bits.setflags(write=False)
        return bits

    @cached_property
    def count(self) -> int:
        return int(self.min_indicators.sum())

    @cached_property
    def cycles(self) -> List[Tuple[int, ...]]:
        """1-based cycles, sorted by minimum, each rotated to start at it."""
        images = self.images.tolist()
        result = []
        for start in np.flatnonzero(self.min_indicators).tolist():
            cycle = [start + 1]
            k = images[start]
            while k != start:
                cycle.append(k + 1)
                k = images[k]
            result.append(tuple(cycle))
        return result

    def to_text(self) -> str:
        return "".join("(" + " ".join(str(k) for k in c) + ")" for c in self.cycles)


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on {1..N}; `images` holds 0-based images."""

    images: np.ndarray

    def __post_init__(self):
        images = _frozen(self.images)
        if images.ndim != 1 or images.size == 0:
            raise GluingError("Permutation needs a non-empty 1-D image sequence")
        n = images.size
        if images.min() < 0 or images.max() >= n or np.bincount(images, minlength=n).max() != 1:
            raise GluingError(f"Image sequence is not a bijection on {n} labels")
        object.__setattr__(self, "images", images)

    @classmethod
    def _trusted(cls, images: np.ndarray) -> "Permutation":
        """Wrap an image array already known to be a bijection."""
        perm = object.__new__(cls)
        object.__setattr__(perm, "images", _frozen(images))
        return perm

    @classmethod
    def identity(cls, N: int) -> "Permutation":
        return cls._trusted(np.arange(N, dtype=np.int64))

    @classmethod
    def from_images(cls, one_based: Iterable[int]) -> "Permutation":
        return cls(np.asarray(list(one_based), dtype=np.int64) - 1)

    @classmethod
    def from_cycles(cls, cycles, N: int) -> "Permutation":
        """
        Build from 1-based cycles, given as text "(1 2 3)(4 5)" or as a list
        of sequences. Labels not mentioned are fixed points.
        """
        if isinstance(cycles, str):
            cycles = [
                [int(tok) for tok in body.replace(",", " ").split()]
                for body in _CYCLE_RE.findall(cycles)
            ]
        images = np.arange(N, dtype=np.int64)
        seen = set()
        for cycle in cycles:
            for a, b in zip(cycle, list(cycle[1:]) + list(cycle[:1])):
                if not 1 <= a <= N or a in seen:
                    raise GluingError(f"Label {a} is out of range or repeated")
                seen.add(a)
                images[a - 1] = b - 1
        return cls(images)

    @classmethod
    def transposition(cls, i: int, j: int, N: int) -> "Permutation":
        return cls.from_cycles([[i, j]], N)

    @property
    def N(self) -> int:
        return int(self.images.shape[0])

    def __call__(self, k: int) -> int:
        return int(self.images[k - 1]) + 1

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.images, other.images)

    def __hash__(self) -> int:
        return hash(self.images.tobytes())

    def __repr__(self) -> str:
        text = self.decomposition.to_text() if self.N <= 32 else f"<{self.decomposition.count} cycles>"
        return f"Permutation(N={self.N}, {text})"

    def to_list(self) -> List[int]:
        return (self.images + 1).tolist()

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.images)
        inv[self.images] = np.arange(self.N, dtype=np.int64)
        return Permutation._trusted(inv)

    @cached_property
    def decomposition(self) -> CycleDecomposition:
        return CycleDecomposition(self.images, orbit_minima(self.images))


@dataclass(frozen=True, eq=False)
class Matching:
    """Fixed-point-free involution; `partner` holds 0-based partners."""

    partner: np.ndarray

    def __post_init__(self):
        partner = _frozen(self.partner)
        n = partner.size
        if n == 0 or n % 2:
            raise UnmatchableDartError(f"A matching needs an even positive dart count, got {n}")
        if partner.min() < 0 or partner.max() >= n:
            raise GluingError("Partner index out of range")
        labels = np.arange(n, dtype=np.int64)
        if not np.array_equal(partner[partner], labels) or np.any(partner == labels):
            raise GluingError("Partner sequence is not a fixed-point-free involution")
        object.__setattr__(self, "partner", partner)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[int, int]], N: int) -> "Matching":
        partner = np.full(N, -1, dtype=np.int64)
        for a, b in pairs:
            partner[a - 1] = b - 1
            partner[b - 1] = a - 1
        if np.any(partner < 0):
            raise UnmatchableDartError("Pairs do not cover every dart")
        return cls(partner)

    @property
    def N(self) -> int:
        return int(self.partner.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, Matching) and np.array_equal(self.partner, other.partner)

    def __hash__(self) -> int:
        return hash(self.partner.tobytes())

    def __repr__(self) -> str:
        return f"Matching(N={self.N}, {self.as_permutation().decomposition.to_text()})"

    def pairs(self) -> List[Tuple[int, int]]:
        """1-based pairs (a, b) with a < b, sorted."""
        lows = np.flatnonzero(np.arange(self.N) < self.partner)
        return [(int(a) + 1, int(self.partner[a]) + 1) for a in lows]

    def as_permutation(self) -> Permutation:
        return Permutation._trusted(self.partner)


# =========================================================================
# Operations
# =========================================================================


def compose(p: Permutation, q: Permutation) -> Permutation:
    """p∘q: apply q first, then p."""
    if p.N != q.N:
        raise IncompatibleCarrierError(f"Cannot compose permutations on {p.N} and {q.N} darts")
    return Permutation._trusted(p.images[q.images])


def sign(p: Permutation) -> int:
    return 1 if (p.N - cycles(p).count) % 2 == 0 else -1


def cycles(p: Permutation) -> CycleDecomposition:
    return p.decomposition


def sample_matching(N: int, stream: np.random.Generator) -> Matching:
    """Uniform fixed-point-free involution: shuffle the labels, pair neighbours."""
    if N < 2 or N % 2:
        raise UnmatchableDartError(f"Cannot match {N} darts")
    order = stream.permutation(N)
    partner = np.empty(N, dtype=np.int64)
    partner[order[0::2]] = order[1::2]
    partner[order[1::2]] = order[0::2]
    matching = object.__new__(Matching)
    object.__setattr__(matching, "partner", _frozen(partner))
    return matching


def sample_uniform_permutation(N: int, stream: np.random.Generator) -> Permutation:
    if N < 1:
        raise GluingError(f"Permutation size must be positive, got {N}")
    return Permutation._trusted(stream.permutation(N))


def sample_matchings_batch(N: int, K: int, stream: np.random.Generator) -> np.ndarray:
    """K independent uniform matchings as a (K, N) array of 0-based partners."""
    if N < 2 or N % 2:
        raise UnmatchableDartError(f"Cannot match {N} darts")
    order = stream.permuted(np.tile(np.arange(N, dtype=np.int64), (K, 1)), axis=1)
    partner = np.empty((K, N), dtype=np.int64)
    np.put_along_axis(partner, order[:, 0::2], order[:, 1::2], axis=1)
    np.put_along_axis(partner, order[:, 1::2], order[:, 0::2], axis=1)
    return partner


def min_indicator_process(p: Permutation, m: int) -> Tuple[int, int]:
    """
    Split the cycle count at label m.

    Returns:
        (B, I): cycles whose minimum is <= m, and the rest
    """
    if not 0 <= m <= p.N:
        raise GluingError(f"Split point {m} outside 0..{p.N}")
    bits = cycles(p).min_indicators
    b_count = int(bits[:m].sum())
    return b_count, cycles(p).count - b_count


def parity_fix(g: Permutation, coin: int) -> Permutation:
    """(1 2)∘g when the coin is set, g otherwise."""
    if g.N < 2:
        raise GluingError("Parity fix needs at least two darts")
    if coin:
        return compose(Permutation.transposition(1, 2, g.N), g)
    return g


def canonical_rotation(*, n: Optional[int] = None, t: Optional[int] = None, N: Optional[int] = None) -> Permutation:
    """
    Canonical rotation: (1 2 .. t)(t+1 .. 2t).. for n t-gons, or the full
    cycle (1 2 .. N) for a single N-gon.
    """
    if t is not None:
        if n is None or n < 1:
            raise GluingError("t-gon rotation needs a positive polygon count n")
        if t < 3:
            raise GluingError(f"Polygons need at least 3 sides, got t={t}")
        if N is not None and N != n * t:
            raise GluingError(f"Size mismatch: {n} polygons of {t} sides is not {N} darts")
        return Permutation._trusted(rotation_from_sequence(np.arange(n * t), [t] * n))
    if N is None or N < 2:
        raise GluingError("Single polygon rotation needs N >= 2")
    return Permutation._trusted(rotation_from_sequence(np.arange(N), [N]))


def restrict(p: Permutation, m: int) -> Permutation:
    """Delete labels above m from the cycles of p."""
    if not 1 <= m <= p.N:
        raise GluingError(f"Restriction size {m} outside 1..{p.N}")
    images = p.images.tolist()
    out = []
    for k in range(m):
        j = images[k]
        while j >= m:
            j = images[j]
        out.append(j)
    return Permutation._trusted(np.asarray(out, dtype=np.int64))


def parity_of(p: Permutation) -> Parity:
    return "even" if sign(p) == 1 else "odd"
