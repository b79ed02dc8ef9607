"""
Normalizations and estimators for the bivariate limit law.

Features:
- ExperimentPlan: model, sample count, seed and the derived constants
  (r, centres and scales of B and genus)
- normalize(), finite_size_targets(), asymptotic_targets(), reference_boundary_law()
- MomentTally / empirical_moments(): mergeable single-pass moments
- ks_statistic(), ks_statistic_discrete(), chi_square(), tv_distance()
- gamma_uniformity_check(): cycle-count law of γ vs the parity-conditioned
  uniform reference

Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy import stats as scipy_stats

from app.core.batch import sample_batch
from app.core.errors import (
    CategoryMismatchError,
    GluingError,
    InvalidModelParamsError,
    UndefinedNormalizationError,
    UnsupportedModelError,
)
from app.core.gluing import ModelKind, ModelParams, SurfaceSummary
from app.core.oracle import harmonic_refs, parity_conditioned_cycle_dist
from app.core.permutation import canonical_rotation, sign

Number = Union[int, float, Fraction]


@dataclass(frozen=True)
class ExperimentPlan:
    params: ModelParams
    samples: int
    master_seed: int

    def __post_init__(self):
        if self.samples < 2:
            raise InvalidModelParamsError(f"An experiment needs at least 2 samples, got {self.samples}")

    @property
    def normalizable(self) -> bool:
        return self.params.m >= 2 and self.params.n >= 3

    @property
    def r(self) -> float:
        """Target anti-correlation, r^2 = log m / log n, capped at 1."""
        m, n = self.params.m, self.params.n
        if m <= 1 or n <= 1:
            return 0.0
        return math.sqrt(min(1.0, math.log(m) / math.log(n)))

    @property
    def genus_lead(self) -> float:
        """Leading genus term: n/4 for triangles and S models, (t-2)n/4 for t-gons."""
        p = self.params
        return (p.t - 2) * p.n / 4 if p.kind.polygon_family else p.n / 4

    def _require_scales(self) -> None:
        if not self.normalizable:
            raise UndefinedNormalizationError(
                f"Normalization needs m >= 2 and n >= 3, got m={self.params.m}, n={self.params.n}"
            )

    @property
    def b_center(self) -> float:
        self._require_scales()
        return math.log(self.params.m)

    @property
    def b_scale(self) -> float:
        self._require_scales()
        return math.sqrt(math.log(self.params.m))

    @property
    def g_center(self) -> float:
        self._require_scales()
        return self.genus_lead - 0.5 * math.log(self.params.n)

    @property
    def g_scale(self) -> float:
        self._require_scales()
        return 0.5 * math.sqrt(math.log(self.params.n))

    def header(self) -> Dict[str, object]:
        """Constants echoed into every report."""
        p = self.params
        head: Dict[str, object] = {
            "model": p.kind.value,
            "n": p.n,
            "m": p.m,
            "t": p.t,
            "samples": self.samples,
            "seed": self.master_seed,
            "log_n": math.log(p.n),
            "log_m": math.log(p.m) if p.m > 0 else None,
            "r": self.r,
        }
        if self.normalizable:
            head.update(
                b_center=self.b_center,
                b_scale=self.b_scale,
                g_center=self.g_center,
                g_scale=self.g_scale,
            )
        return head


@dataclass(frozen=True)
class NormalizedPair:
    b_hat: float
    g_hat: float


class FiniteSizeTargets(NamedTuple):
    E_B: float
    Var_B: float
    E_G: float
    Var_G: float
    corr_target: float


class MomentReport(BaseModel):
    K: int
    mean_B: float
    var_B: float
    mean_G: float
    var_G: float
    corr_BG: Optional[float] = None
    se_mean_B: float
    se_var_B: float
    se_mean_G: float
    se_var_G: float
    se_corr: Optional[float] = None


# =========================================================================
# Normalization and reference targets
# =========================================================================


def normalize_values(b: Union[Number, np.ndarray], genus: Union[Number, np.ndarray], plan: ExperimentPlan):
    """Affine map of raw (B, genus) onto the limit-law scale; arrays allowed."""
    b_hat = (np.asarray(b, dtype=np.float64) - plan.b_center) / plan.b_scale
    g_hat = (np.asarray(genus, dtype=np.float64) - plan.g_center) / plan.g_scale
    return b_hat, g_hat


def normalize(summary: SurfaceSummary, plan: ExperimentPlan) -> NormalizedPair:
    b_hat, g_hat = normalize_values(summary.B, summary.genus, plan)
    return NormalizedPair(b_hat=float(b_hat), g_hat=float(g_hat))


def finite_size_targets(plan: ExperimentPlan) -> FiniteSizeTargets:
    """
    Exact finite-size moments under the uniform reference permutation.

    B and I are sums of independent Bernoulli(1/k) over k <= m and
    m < k <= N, and for a connected sample
    genus = 1 - faces/2 + N/4 - (B + I)/2.
    """
    p = plan.params
    if not p.kind.primed:
        raise UnsupportedModelError(f"Exact targets cover T' and S' only, got {p}; compare by Monte Carlo")
    h_m, h2_m = harmonic_refs(p.m, exact=False)
    h_n, h2_n = harmonic_refs(p.N, exact=False)
    var_b = h_m - h2_m
    var_i = (h_n - h_m) - (h2_n - h2_m)
    e_g = 1 - p.faces / 2 + p.N / 4 - h_n / 2
    var_g = (var_b + var_i) / 4
    total = var_b + var_i
    corr = -math.sqrt(var_b / total) if total > 0 else float("nan")
    return FiniteSizeTargets(E_B=h_m, Var_B=var_b, E_G=e_g, Var_G=var_g, corr_target=corr)


def reference_boundary_law(m: int) -> Dict[int, float]:
    """
    Law of B under the uniform reference: a sum of independent
    Bernoulli(1/k), k = 1..m, i.e. [m b]/m! in floating point for any m.
    """
    law = np.ones(1)
    for k in range(1, m + 1):
        law = np.convolve(law, [1 - 1 / k, 1 / k])
    return {b: float(p) for b, p in enumerate(law) if p > 0}


def asymptotic_targets(plan: ExperimentPlan) -> FiniteSizeTargets:
    """The limit law's centres and scales in the same layout."""
    return FiniteSizeTargets(
        E_B=plan.b_center,
        Var_B=plan.b_scale ** 2,
        E_G=plan.g_center,
        Var_G=plan.g_scale ** 2,
        corr_target=-plan.r,
    )


# =========================================================================
# Moments
# =========================================================================


@dataclass
class MomentTally:
    """
    Count, sums, sums of squares and cross-products of (B, genus).

    Partial tallies from independent workers merge associatively. Integer
    input keeps every sum an exact Python int.
    """

    count: int = 0
    sum_b: Number = 0
    sum_g: Number = 0
    sum_bb: Number = 0
    sum_gg: Number = 0
    sum_bg: Number = 0

    def add(self, b: Number, g: Number) -> None:
        self.count += 1
        self.sum_b += b
        self.sum_g += g
        self.sum_bb += b * b
        self.sum_gg += g * g
        self.sum_bg += b * g

    def add_arrays(self, b: np.ndarray, g: np.ndarray) -> None:
        b = np.asarray(b)
        g = np.asarray(g)
        if b.dtype.kind in "iu":
            b = b.astype(object)
        if g.dtype.kind in "iu":
            g = g.astype(object)
        self.count += int(len(b))
        self.sum_b += b.sum()
        self.sum_g += g.sum()
        self.sum_bb += (b * b).sum()
        self.sum_gg += (g * g).sum()
        self.sum_bg += (b * g).sum()

    def merge(self, other: "MomentTally") -> "MomentTally":
        return MomentTally(
            count=self.count + other.count,
            sum_b=self.sum_b + other.sum_b,
            sum_g=self.sum_g + other.sum_g,
            sum_bb=self.sum_bb + other.sum_bb,
            sum_gg=self.sum_gg + other.sum_gg,
            sum_bg=self.sum_bg + other.sum_bg,
        )

    def report(self) -> MomentReport:
        k = self.count
        if k < 2:
            raise GluingError(f"Moments need at least 2 samples, got {k}")
        # K^2 times the biased (co)variances; exact for integer input
        sxx = k * self.sum_bb - self.sum_b * self.sum_b
        syy = k * self.sum_gg - self.sum_g * self.sum_g
        sxy = k * self.sum_bg - self.sum_b * self.sum_g
        var_b = float(sxx) / (k * (k - 1))
        var_g = float(syy) / (k * (k - 1))
        corr = None
        se_corr = None
        if sxx > 0 and syy > 0:
            corr = max(-1.0, min(1.0, float(sxy) / math.sqrt(float(sxx) * float(syy))))
            se_corr = (1 - corr * corr) / math.sqrt(k)
        return MomentReport(
            K=k,
            mean_B=float(self.sum_b) / k,
            var_B=var_b,
            mean_G=float(self.sum_g) / k,
            var_G=var_g,
            corr_BG=corr,
            se_mean_B=math.sqrt(var_b / k),
            se_var_B=var_b * math.sqrt(2 / (k - 1)),
            se_mean_G=math.sqrt(var_g / k),
            se_var_G=var_g * math.sqrt(2 / (k - 1)),
            se_corr=se_corr,
        )


def empirical_moments(pairs: Iterable[Tuple[Number, Number]]) -> MomentReport:
    """Sample moments of a stream of (B, genus) pairs."""
    tally = MomentTally()
    for b, g in pairs:
        tally.add(b, g)
    return tally.report()


# =========================================================================
# Goodness of fit
# =========================================================================


def ks_statistic(values: Sequence[float], reference_cdf: Callable = scipy_stats.norm.cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance to a continuous reference."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    k = len(x)
    if k == 0:
        raise GluingError("KS statistic needs at least one value")
    f = reference_cdf(x)
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - f), np.max(f - (i - 1) / k)))


def ks_statistic_discrete(values: Sequence[int], reference: Mapping[int, Number]) -> float:
    """Largest CDF gap between integer samples and an exact integer law."""
    x = np.asarray(values, dtype=np.int64)
    if len(x) == 0:
        raise GluingError("KS statistic needs at least one value")
    support = sorted(set(reference) | set(np.unique(x).tolist()))
    ref_cdf = np.cumsum([float(reference.get(v, 0)) for v in support])
    emp_cdf = np.searchsorted(np.sort(x), support, side="right") / len(x)
    return float(np.max(np.abs(emp_cdf - ref_cdf)))


class ChiSquareResult(NamedTuple):
    statistic: float
    dof: int

    @property
    def p_value(self) -> float:
        if self.dof < 1:
            return 1.0
        return float(scipy_stats.chi2.sf(self.statistic, self.dof))


def chi_square(
    observed: Mapping[Hashable, int],
    expected: Mapping[Hashable, Number],
    min_expected: float = 5.0,
) -> ChiSquareResult:
    """
    Pearson chi-square of counts against a probability table.

    Categories with expected count below `min_expected` are pooled into one
    bin; a pooled bin still below it is merged into the smallest other bin.
    """
    unknown = set(observed) - set(expected)
    if unknown:
        raise CategoryMismatchError(f"Observed categories missing from the expected table: {sorted(unknown, key=str)}")
    total = sum(observed.values())
    if total < 1:
        raise GluingError("Chi-square needs at least one observation")
    if abs(float(sum(expected.values())) - 1.0) > 1e-9:
        raise CategoryMismatchError("Expected probabilities must sum to 1")

    bins = []
    pooled_obs, pooled_exp = 0, 0.0
    for category, p in expected.items():
        e = total * float(p)
        o = observed.get(category, 0)
        if e < min_expected:
            pooled_obs += o
            pooled_exp += e
        else:
            bins.append([o, e])
    if pooled_exp > 0 or pooled_obs > 0:
        if pooled_exp < min_expected and bins:
            smallest = min(range(len(bins)), key=lambda i: bins[i][1])
            bins[smallest][0] += pooled_obs
            bins[smallest][1] += pooled_exp
        else:
            bins.append([pooled_obs, pooled_exp])
    statistic = sum((o - e) ** 2 / e for o, e in bins if e > 0)
    return ChiSquareResult(statistic=float(statistic), dof=max(0, len(bins) - 1))


def tv_distance(hist_p: Mapping[Hashable, Number], hist_q: Mapping[Hashable, Number]) -> float:
    """Half the L1 distance between two probability tables."""
    keys = set(hist_p) | set(hist_q)
    return 0.5 * sum(abs(float(hist_p.get(k, 0)) - float(hist_q.get(k, 0))) for k in keys)


def empirical_table(values: Iterable[Hashable]) -> Dict[Hashable, float]:
    """Relative frequencies of a stream of hashable outcomes."""
    counts: Dict[Hashable, int] = {}
    total = 0
    for v in values:
        counts[v] = counts.get(v, 0) + 1
        total += 1
    return {k: c / total for k, c in counts.items()}


def gamma_uniformity_check(
    N: int,
    model: Union[ModelKind, str],
    K: int,
    seed: int = 0,
) -> float:
    """
    TV distance between the cycle-count law of γ and the uniform law on
    order-N permutations of γ's forced parity sign(α)(-1)^(N/2).
    """
    kind = ModelKind(model)
    if kind is ModelKind.TPRIME:
        if N % 3:
            raise InvalidModelParamsError(f"T' with triangles needs N divisible by 3, got {N}")
        params = ModelParams(kind, N // 3, 0, 3)
        alpha = canonical_rotation(n=N // 3, t=3)
    elif kind is ModelKind.SPRIME:
        params = ModelParams(kind, N, 0)
        alpha = canonical_rotation(N=N)
    else:
        raise UnsupportedModelError(f"γ uniformity is checked on T' and S', got {kind.value}")
    forced = sign(alpha) * (-1) ** (N // 2)
    reference = parity_conditioned_cycle_dist(N, "even" if forced == 1 else "odd")
    counts = np.bincount(sample_batch(params, K, seed).cycle_count, minlength=N + 1)
    empirical = {c: counts[c] / K for c in np.flatnonzero(counts).tolist()}
    return tv_distance(empirical, reference)
