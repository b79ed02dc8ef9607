"""
Exact reference laws at desk scale.

Features:
- enumerate_matchings(): every fixed-point-free involution, deterministic order
- exact_joint(): brute force over matchings x boundary placements via summarize()
- exact_joint_by_cycles(): same law for T'/S' from γ-cycle lengths only
- stirling_first(), harmonic_refs(), parity_conditioned_cycle_dist()
- restriction_parity_bias(), exact_restriction_law(), exact_restriction_parity():
  fixed-m parity refinement

All probabilities are Fractions.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import settings
from app.core.errors import EnumerationGuardError, GluingError, UnsupportedModelError
from app.core.gluing import (
    ModelKind,
    ModelParams,
    assemble_instance,
    connected_components,
    summarize,
)
from app.core.permutation import (
    Matching,
    Parity,
    Permutation,
    canonical_rotation,
    cycles,
    parity_of,
    restrict,
)

logger = logging.getLogger(__name__)

JointKey = Tuple[int, int, bool]


@dataclass(frozen=True)
class ExactDistribution:
    """Exact law of (B, genus, connected)."""

    probability: Dict[JointKey, Fraction]

    @property
    def support(self) -> List[JointKey]:
        return sorted(self.probability)

    def total(self) -> Fraction:
        return sum(self.probability.values(), Fraction(0))

    def marginal(self, field: Literal["B", "genus", "connected"]) -> Dict[Union[int, bool], Fraction]:
        position = {"B": 0, "genus": 1, "connected": 2}[field]
        law: Dict[Union[int, bool], Fraction] = {}
        for key, p in self.probability.items():
            law[key[position]] = law.get(key[position], Fraction(0)) + p
        return dict(sorted(law.items()))

    def projected(self) -> Dict[Tuple[int, int], Fraction]:
        """Law of (B, genus), dropping the connected flag."""
        law: Dict[Tuple[int, int], Fraction] = {}
        for (b, g, _), p in self.probability.items():
            law[(b, g)] = law.get((b, g), Fraction(0)) + p
        return law

    def rows(self) -> List[Dict[str, object]]:
        return [
            {
                "B": b,
                "genus": g,
                "connected": conn,
                "numerator": p.numerator,
                "denominator": p.denominator,
            }
            for (b, g, conn), p in sorted(self.probability.items())
        ]


@dataclass(frozen=True)
class StirlingRow:
    """Unsigned Stirling numbers of the first kind [m b], b = 1..m."""

    m: int
    values: Tuple[int, ...]

    def __getitem__(self, b: int) -> int:
        return self.values[b - 1]

    def law(self) -> Dict[int, Fraction]:
        """Cycle-count law of a uniform order-m permutation."""
        total = math.factorial(self.m)
        return {b: Fraction(v, total) for b, v in enumerate(self.values, start=1)}


# =========================================================================
# Enumeration
# =========================================================================


def matching_count(N: int) -> int:
    """(N-1)!!"""
    return math.prod(range(N - 1, 0, -2)) if N > 0 else 1


def _pairings(labels: List[int]) -> Iterator[List[Tuple[int, int]]]:
    if not labels:
        yield []
        return
    first, rest = labels[0], labels[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


def enumerate_matchings(N: int) -> Iterator[Matching]:
    """
    Every perfect matching on N darts, once each.

    The smallest unpaired label is paired with each larger one in turn,
    recursively, so the stream order is fixed.
    """
    if N < 2 or N % 2:
        raise GluingError(f"Matchings need an even positive dart count, got {N}")
    if N > settings.MATCHING_ENUMERATION_MAX_N:
        raise EnumerationGuardError(
            f"Enumerating {matching_count(N)} matchings on {N} darts exceeds the guard "
            f"N <= {settings.MATCHING_ENUMERATION_MAX_N}"
        )
    for pairs in _pairings(list(range(N))):
        partner = np.empty(N, dtype=np.int64)
        for a, b in pairs:
            partner[a] = b
            partner[b] = a
        yield Matching(partner)


def placements(params: ModelParams) -> Iterator[Tuple[int, ...]]:
    """Every boundary placement of the model, each equally likely."""
    if params.kind.primed:
        return itertools.combinations(range(params.N), params.m)
    if params.kind is ModelKind.S:
        return itertools.combinations(range(params.n + params.m), params.m)
    return iter([()])


def placement_count(params: ModelParams) -> int:
    if params.kind.primed:
        return math.comb(params.N, params.m)
    if params.kind is ModelKind.S:
        return math.comb(params.n + params.m, params.m)
    return 1


def case_count(params: ModelParams) -> int:
    return matching_count(params.N) * placement_count(params)


def _check_guard(params: ModelParams, cases: int) -> None:
    if cases > settings.EXACT_CASE_LIMIT:
        raise EnumerationGuardError(
            f"{params} has {cases} cases, above the exact limit of {settings.EXACT_CASE_LIMIT}; "
            f"use Monte Carlo sampling instead"
        )


def exact_joint(params: ModelParams) -> ExactDistribution:
    """Law of (B, genus, connected) over all equally likely cases."""
    cases = case_count(params)
    _check_guard(params, cases)
    tally: Counter = Counter()
    for matching in enumerate_matchings(params.N):
        for placement in placements(params):
            s = summarize(assemble_instance(params, matching, placement))
            tally[(s.B, s.genus, s.connected)] += 1
    logger.info("Exact joint computed - model: %s, cases: %d, support: %d", params, cases, len(tally))
    return ExactDistribution({key: Fraction(count, cases) for key, count in tally.items()})


def _subsets_by_cycles_hit(lengths: Sequence[int], m: int) -> List[int]:
    """
    Number of m-subsets of the labels touching exactly b cycles, b = 0..m.

    Coefficient of x^m y^b in prod over cycles of (1 + y((1+x)^L - 1)).
    """
    poly = [[0] * (m + 1) for _ in range(m + 1)]  # poly[b][j]
    poly[0][0] = 1
    for length in lengths:
        hit = [math.comb(length, j) for j in range(m + 1)]
        hit[0] = 0
        nxt = [row[:] for row in poly]
        for b in range(m):
            for j, coeff in enumerate(poly[b]):
                if coeff:
                    for k in range(1, m + 1 - j):
                        if hit[k]:
                            nxt[b + 1][j + k] += coeff * hit[k]
        poly = nxt
    return [poly[b][m] for b in range(m + 1)]


def exact_joint_by_cycles(params: ModelParams) -> ExactDistribution:
    """
    Law of (B, genus, connected) for T'/S', enumerating matchings only.

    For each matching the insertion subsets are counted per number of
    γ-cycles they touch, so cost does not grow with C(N, m).
    """
    if not params.kind.primed:
        raise UnsupportedModelError(f"Cycle counting needs a primed model, got {params}")
    _check_guard(params, matching_count(params.N))
    N, m = params.N, params.m
    closed = ModelParams(params.kind, params.n, 0, params.t)
    if params.kind.polygon_family:
        alpha = canonical_rotation(n=params.n, t=params.t)
    else:
        alpha = canonical_rotation(N=N)
    tally: Counter = Counter()
    for matching in enumerate_matchings(N):
        gamma = Permutation._trusted(alpha.images[matching.partner])
        minima = cycles(gamma).minima
        lengths = np.bincount(minima)[np.unique(minima)].tolist()
        components = connected_components(assemble_instance(closed, matching))
        for b, count in enumerate(_subsets_by_cycles_hit(lengths, m)):
            if not count:
                continue
            internal = len(lengths) - b
            chi = params.faces - N // 2 + internal
            genus = (2 * components - b - chi) // 2
            tally[(b, genus, components == 1)] += count
    cases = case_count(params)
    return ExactDistribution({key: Fraction(count, cases) for key, count in tally.items()})


# =========================================================================
# Closed-form references
# =========================================================================


def stirling_first(m: int) -> StirlingRow:
    """Row m via [m b] = [m-1 b-1] + (m-1)[m-1 b]."""
    if not 1 <= m <= settings.STIRLING_MAX_M:
        raise GluingError(f"Stirling row index must lie in 1..{settings.STIRLING_MAX_M}, got {m}")
    row = [1]  # [1 1]
    for k in range(2, m + 1):
        row = [
            (row[b - 2] if b >= 2 else 0) + (k - 1) * (row[b - 1] if b <= k - 1 else 0)
            for b in range(1, k + 1)
        ]
    return StirlingRow(m=m, values=tuple(row))


def harmonic_refs(m: int, exact: bool = True) -> Tuple[Union[Fraction, float], Union[Fraction, float]]:
    """
    (H_m, H_m^(2)). Under a uniform permutation B = sum of independent
    Bernoulli(1/k), k <= m, so E[B] = H_m and Var[B] = H_m - H_m^(2).
    """
    if m < 0:
        raise GluingError(f"Harmonic index must be nonnegative, got {m}")
    if not exact:
        k = np.arange(1, m + 1, dtype=np.float64)
        return float(np.sum(1.0 / k)), float(np.sum(1.0 / (k * k)))
    h1 = sum((Fraction(1, k) for k in range(1, m + 1)), Fraction(0))
    h2 = sum((Fraction(1, k * k) for k in range(1, m + 1)), Fraction(0))
    return h1, h2


def parity_conditioned_cycle_dist(N: int, parity: Parity) -> Dict[int, Fraction]:
    """Cycle-count law of a uniform order-N permutation of the given parity."""
    row = stirling_first(N)
    wanted = 0 if parity == "even" else 1
    kept = {c: v for c, v in enumerate(row.values, start=1) if (N - c) % 2 == wanted}
    total = sum(kept.values())
    if total == 0:
        raise GluingError(f"No {parity} permutations on {N} labels")
    return {c: Fraction(v, total) for c, v in kept.items()}


def restriction_parity_bias(m: int, N: int) -> Fraction:
    """
    Deviation of restrict(p, m) from uniform when p is uniform of a fixed parity.

    Each restricted permutation σ has probability (1 ± bias)/m!, the sign being
    sign(σ) sign(p) (-1)^(N-m), so for m >= 2 the restricted parities split as
    (1 ± bias)/2.
    """
    if not 1 <= m <= N or N < 2:
        raise GluingError(f"Need 1 <= m <= N and N >= 2, got m={m}, N={N}")
    return Fraction(m * (m - 1), N * (N - 1))


def exact_restriction_law(N: int, m: int, parity: Parity) -> Dict[Permutation, Fraction]:
    """Law of restrict(p, m) for p uniform among order-N permutations of a parity."""
    if N > 8:
        raise EnumerationGuardError(f"Enumerating {math.factorial(N)} permutations exceeds N <= 8")
    tally: Counter = Counter()
    for images in itertools.permutations(range(N)):
        p = Permutation._trusted(np.asarray(images, dtype=np.int64))
        if parity_of(p) == parity:
            tally[restrict(p, m)] += 1
    total = sum(tally.values())
    return {perm: Fraction(count, total) for perm, count in tally.items()}


def exact_restriction_parity(N: int, m: int, parity: Parity) -> Dict[Parity, Fraction]:
    """Parity law of restrict(p, m) for p uniform among order-N permutations of a parity."""
    law: Dict[Parity, Fraction] = {"even": Fraction(0), "odd": Fraction(0)}
    for perm, p in exact_restriction_law(N, m, parity).items():
        law[parity_of(perm)] += p
    return law
