"""
Acceptance suite for the gluing simulator.

Each criterion is a function of a SuiteContext returning (passed, detail).
run_suite() times every criterion and turns exceptions into failed
verdicts, so one broken check never hides the others.

Quick mode divides sample counts by the run-default quick divisor and widens
statistical tolerances by its square root. Exact criteria keep zero-failure
semantics in both modes.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import stats as scipy_stats

from app.config import settings
from app.core import gluing
from app.core.batch import sample_batch, separated_layouts
from app.core.errors import GluingError, InvariantViolation
from app.core.gluing import ModelKind, ModelParams, boundary_shortcut, build_instance, gamma_of
from app.core.oracle import (
    exact_joint,
    exact_joint_by_cycles,
    exact_restriction_law,
    exact_restriction_parity,
    harmonic_refs,
    restriction_parity_bias,
    stirling_first,
)
from app.core.permutation import canonical_rotation, parity_of, sign
from app.core.run_config import load_run_defaults
from app.core.stats import (
    ExperimentPlan,
    MomentTally,
    chi_square,
    empirical_table,
    finite_size_targets,
    gamma_uniformity_check,
    ks_statistic,
    ks_statistic_discrete,
    normalize_values,
    reference_boundary_law,
    tv_distance,
)
from app.services.sampler import map_instances, resolve_threads, sample_record, substream
from app.services.writers import dumps_json

logger = logging.getLogger(__name__)

Detail = Dict[str, object]


@dataclass
class Verdict:
    id: str
    passed: bool
    detail: Detail = field(default_factory=dict)
    seconds: float = 0.0

    def as_record(self) -> Dict[str, object]:
        return {"id": self.id, "passed": self.passed, "seconds": self.seconds, "detail": self.detail}


@dataclass(frozen=True)
class SuiteContext:
    seed: int
    quick: bool = False
    threads: Union[int, str] = 1

    @property
    def divisor(self) -> int:
        return load_run_defaults().quick_divisor if self.quick else 1

    def samples(self, full: int, floor: int = 100) -> int:
        return full if not self.quick else max(floor, full // self.divisor)

    def tol(self, full: float) -> float:
        return full * math.sqrt(self.divisor)

    def child_seed(self, salt: int) -> int:
        state = np.random.SeedSequence(self.seed, spawn_key=(1 << 20, salt)).generate_state(2, np.uint32)
        return int(state[0]) << 32 | int(state[1])


def _within(value: float, target: float, tol: float) -> bool:
    return math.isfinite(value) and abs(value - target) <= tol


def _joint_table(b: Iterable[int], genus: Iterable[int]) -> Dict[Tuple[int, int], float]:
    return empirical_table(zip(b, genus))


# =========================================================================
# Per-sample checks (module level so worker processes can unpickle them)
# =========================================================================


def _euler_failure(params: ModelParams, seed: int, index: int) -> Optional[int]:
    instance = build_instance(params, substream(seed, index))
    try:
        s = gluing.summarize(instance)
    except InvariantViolation:
        return index
    trace = gluing.boundary_walk(instance)
    ok = (
        s.chi == 2 * s.components - 2 * s.genus - s.B
        and s.chi == s.faces - s.edges + s.vertices
        and s.vertices == s.I + params.m
        and s.boundary_vertices == params.m
        and sum(len(c) for c in trace.cycles) == params.m
        and s.genus >= 0
    )
    return None if ok else index


def _shortcut_failure(params: ModelParams, seed: int, index: int) -> Optional[int]:
    instance = build_instance(params, substream(seed, index))
    fast = boundary_shortcut(gamma_of(instance), instance.insertions)
    walked = (gluing.boundary_walk(instance).B, gluing.vertex_classes(instance)[0])
    return None if fast == walked else index


def _parity_failure(params: ModelParams, seed: int, index: int) -> Optional[int]:
    instance = build_instance(params, substream(seed, index))
    gamma = gamma_of(instance)
    if params.kind.polygon_family:
        alpha = canonical_rotation(n=params.n, t=params.t)
    else:
        alpha = canonical_rotation(N=params.N)
    forced = sign(alpha) * (-1) ** (params.N // 2)
    b_count, internal = boundary_shortcut(gamma, instance.insertions)
    ok = sign(gamma) == forced and (params.N - b_count - internal) % 2 == (0 if forced == 1 else 1)
    return None if ok else index


def _failures(ctx: SuiteContext, params: ModelParams, samples: int, seed: int, check) -> List[int]:
    return [i for i in map_instances(params, samples, seed, check, ctx.threads) if i is not None]


# =========================================================================
# Criteria
# =========================================================================


def check_oracle(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Monte Carlo vs exact tables for T'(2, m=1) and S(4, m=0)."""
    tprime = ModelParams(ModelKind.TPRIME, 2, 1, 3)
    exact = exact_joint(tprime)
    by_cycles = exact_joint_by_cycles(tprime)
    reference = exact.projected()

    batch = sample_batch(tprime, ctx.samples(10 ** 6), ctx.child_seed(1))
    tv_batch = tv_distance(_joint_table(batch.B.tolist(), batch.genus.tolist()), reference)

    walked = list(map_instances(tprime, ctx.samples(20_000), ctx.child_seed(2), threads=ctx.threads))
    tv_walked = tv_distance(_joint_table((s.B for s in walked), (s.genus for s in walked)), reference)

    s4 = ModelParams(ModelKind.S, 4, 0)
    s4_exact = exact_joint(s4).marginal("genus")
    s4_expected = {0: Fraction(2, 3), 1: Fraction(1, 3)}
    s4_batch = sample_batch(s4, ctx.samples(10 ** 6), ctx.child_seed(3))
    tv_s4 = tv_distance(empirical_table(s4_batch.genus.tolist()), s4_expected)

    passed = (
        exact.probability == by_cycles.probability
        and exact.total() == 1
        and s4_exact == s4_expected
        and tv_batch <= ctx.tol(0.01)
        and tv_walked <= ctx.tol(0.03)
        and tv_s4 <= ctx.tol(0.005)
    )
    return passed, {
        "tprime_support": len(exact.probability),
        "tprime_cycles_agree": exact.probability == by_cycles.probability,
        "tprime_tv_batch": tv_batch,
        "tprime_tv_walk": tv_walked,
        "s4_exact_matches": s4_exact == s4_expected,
        "s4_tv": tv_s4,
    }


def _euler_grid() -> List[ModelParams]:
    grid = []
    for n in (4, 12, 30):
        ms = sorted({0, 1, math.ceil(math.sqrt(n)), n // 2})
        for kind in (ModelKind.T, ModelKind.TPRIME):
            for t in (3, 4, 5):
                grid.extend(ModelParams(kind, n, m, t) for m in ms)
        for kind in (ModelKind.S, ModelKind.SPRIME):
            grid.extend(ModelParams(kind, n, m) for m in ms)
    return grid


def check_euler(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """chi = 2 components - 2 genus - B on every sample of every model."""
    grid = _euler_grid()
    per_model = max(5, ctx.samples(10 ** 5) // len(grid))
    failures = {}
    for salt, params in enumerate(grid):
        bad = _failures(ctx, params, per_model, ctx.child_seed(100 + salt), _euler_failure)
        if bad:
            failures[str(params)] = bad[:5]
    return not failures, {"models": len(grid), "samples": per_model * len(grid), "failures": failures}


def check_shortcut(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """γ-cycle reading equals the boundary walk on T'/S'."""
    models = [ModelParams(ModelKind.TPRIME, n, m, t) for t in (3, 4) for n in (10, 50) for m in (1, 5, n)]
    models += [ModelParams(ModelKind.SPRIME, n, m) for n in (10, 100) for m in (1, 5, n)]
    per_model = max(5, ctx.samples(10 ** 5) // len(models))
    failures = {}
    for salt, params in enumerate(models):
        bad = _failures(ctx, params, per_model, ctx.child_seed(200 + salt), _shortcut_failure)
        if bad:
            failures[str(params)] = bad[:5]
    return not failures, {"samples": per_model * len(models), "failures": failures}


def check_parity(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """sign(γ) = sign(α)(-1)^(N/2) and the parity of B + I it forces."""
    models = [
        ModelParams(ModelKind.TPRIME, 10, 3, 3),
        ModelParams(ModelKind.TPRIME, 9, 4, 4),
        ModelParams(ModelKind.SPRIME, 12, 4),
        ModelParams(ModelKind.SPRIME, 14, 0),
    ]
    per_model = max(5, ctx.samples(10 ** 4) // len(models))
    failures = {}
    for salt, params in enumerate(models):
        bad = _failures(ctx, params, per_model, ctx.child_seed(300 + salt), _parity_failure)
        if bad:
            failures[str(params)] = bad[:5]

    batch_models = [ModelParams(ModelKind.TPRIME, 300, 10, 3), ModelParams(ModelKind.SPRIME, 1000, 10)]
    batch_bad = {}
    for salt, params in enumerate(batch_models):
        alpha = canonical_rotation(n=params.n, t=params.t) if params.kind.polygon_family else canonical_rotation(N=params.N)
        forced = sign(alpha) * (-1) ** (params.N // 2)
        summary = sample_batch(params, ctx.samples(5 * 10 ** 4), ctx.child_seed(310 + salt))
        wrong = int(np.count_nonzero((params.N - summary.B - summary.I) % 2 != (0 if forced == 1 else 1)))
        if wrong:
            batch_bad[str(params)] = wrong
    return not failures and not batch_bad, {"failures": failures, "batch_failures": batch_bad}


def check_stirling(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Fixed m: B on S'(2000, 3) follows [3 b]/3!."""
    params = ModelParams(ModelKind.SPRIME, 2000, 3)
    K = ctx.samples(10 ** 5)
    summary = sample_batch(params, K, ctx.child_seed(4))
    observed = {int(b): int(c) for b, c in zip(*np.unique(summary.B, return_counts=True))}
    result = chi_square(observed, stirling_first(3).law())
    critical = float(scipy_stats.chi2.ppf(0.999, result.dof)) if result.dof else 0.0
    passed = result.dof >= 1 and result.statistic < critical
    return passed, {"K": K, "statistic": result.statistic, "dof": result.dof, "critical": critical}


def _reference_sums(m: int, K: int, stream: np.random.Generator) -> np.ndarray:
    """K draws of sum_k Bernoulli(1/k), k = 1..m."""
    probs = 1.0 / np.arange(1, m + 1)
    rows = max(1, settings.BATCH_ELEMENT_LIMIT // m)
    parts = [
        (stream.random((min(rows, K - start), m)) < probs).sum(axis=1)
        for start in range(0, K, rows)
    ]
    return np.concatenate(parts)


def check_theorem(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Finite-size moments and marginal law on S'(10^4, 100)."""
    params = ModelParams(ModelKind.SPRIME, 10 ** 4, 100)
    K = ctx.samples(10 ** 4)
    plan = ExperimentPlan(params, K, ctx.child_seed(6))
    summary = sample_batch(params, K, plan.master_seed)
    tally = MomentTally()
    tally.add_arrays(summary.B, summary.genus)
    report = tally.report()
    targets = finite_size_targets(plan)
    ks_exact = ks_statistic_discrete(summary.B, reference_boundary_law(params.m))
    b_hat, _ = normalize_values(summary.B, summary.genus, plan)
    ks_normal = ks_statistic(b_hat)

    # normality of the centred reference sums, jittered to remove lattice steps
    m_ref = 10 ** 4
    stream = np.random.Generator(np.random.PCG64(ctx.child_seed(61)))
    sums = _reference_sums(m_ref, ctx.samples(10 ** 4), stream)
    h1, h2 = harmonic_refs(m_ref, exact=False)
    jittered = (sums + stream.random(len(sums)) - 0.5 - h1) / math.sqrt(h1 - h2 + 1 / 12)
    ks_reference = ks_statistic(jittered)

    corr = report.corr_BG if report.corr_BG is not None else float("nan")
    passed = (
        _within(report.mean_B, targets.E_B, ctx.tol(0.05))
        and _within(report.mean_G, targets.E_G, ctx.tol(0.1))
        and _within(corr, targets.corr_target, ctx.tol(0.03))
        and ks_exact <= ctx.tol(0.05)
        and ks_reference <= ctx.tol(0.02)
    )
    return passed, {
        "K": K,
        "mean_B": report.mean_B,
        "E_B": targets.E_B,
        "mean_genus": report.mean_G,
        "E_genus": targets.E_G,
        "corr": report.corr_BG,
        "corr_target": targets.corr_target,
        "ks_b_exact": ks_exact,
        "ks_b_hat_normal": ks_normal,
        "ks_reference_normal": ks_reference,
    }


def check_corollary(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """S(10^4, 10) and S'(10^4, 10) give close (B, genus) laws."""
    n, m = 10 ** 4, 10
    s_model = ModelParams(ModelKind.S, n, m)
    s_prime = ModelParams(ModelKind.SPRIME, n, m)
    K = ctx.samples(10 ** 5)
    left = sample_batch(s_model, K, ctx.child_seed(71))
    right = sample_batch(s_prime, K, ctx.child_seed(72))
    tv = tv_distance(
        _joint_table(left.B.tolist(), left.genus.tolist()),
        _joint_table(right.B.tolist(), right.genus.tolist()),
    )
    separated = float(np.mean(separated_layouts(s_model, ctx.samples(10 ** 5), ctx.child_seed(73))))
    passed = separated >= 0.95 and tv <= ctx.tol(0.05)
    return passed, {"K": K, "separated_fraction": separated, "tv": tv}


def check_connectivity(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """T'(n, ceil(sqrt n)) is connected w.h.p., increasingly so with n."""
    K = ctx.samples(10 ** 4)
    fractions = {}
    for salt, n in enumerate((50, 200, 800)):
        params = ModelParams(ModelKind.TPRIME, n, math.ceil(math.sqrt(n)), 3)
        fractions[n] = float(np.mean(sample_batch(params, K, ctx.child_seed(80 + salt)).connected))
    sizes = sorted(fractions)
    se = {n: math.sqrt(max(fractions[n] * (1 - fractions[n]), 1e-12) / K) for n in sizes}
    monotone = all(
        fractions[b] >= fractions[a] - 2 * math.hypot(se[a], se[b])
        for a, b in zip(sizes, sizes[1:])
    )
    floor = 0.8 if ctx.quick else 0.9
    passed = fractions[800] >= floor and monotone
    return passed, {"K": K, "connected_fraction": {str(n): f for n, f in fractions.items()}}


def check_ribbon(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """m = n on S': no internal vertex and 2 genus + B = n/2 + 1."""
    n = 200
    params = ModelParams(ModelKind.SPRIME, n, n)
    summary = sample_batch(params, ctx.samples(10 ** 4), ctx.child_seed(9))
    internal = int(np.count_nonzero(summary.I))
    affine = int(np.count_nonzero(2 * summary.genus + summary.B != n // 2 + 1))
    return internal == 0 and affine == 0, {"samples": len(summary), "internal_nonzero": internal, "affine_failures": affine}


def check_gamma(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """γ cycle counts vs the parity-conditioned uniform law at N = 60."""
    K = ctx.samples(10 ** 6)
    distances = {
        model.value: gamma_uniformity_check(60, model, K, ctx.child_seed(100_000 + i))
        for i, model in enumerate((ModelKind.TPRIME, ModelKind.SPRIME))
    }
    return all(d <= ctx.tol(0.05) for d in distances.values()), {"K": K, "tv": distances}


def check_performance(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Single huge sample, serial throughput, parallel speedup and determinism."""
    big = ModelParams(ModelKind.SPRIME, 10 ** 6, 10 ** 3)
    began = time.perf_counter()
    gluing.summarize(build_instance(big, substream(ctx.seed, 0)))
    single = time.perf_counter() - began

    params = ModelParams(ModelKind.SPRIME, 10 ** 4, 100)
    K = ctx.samples(10 ** 4)
    began = time.perf_counter()
    serial = [dumps_json(r) for r in map_instances(params, K, ctx.seed, sample_record, threads=1)]
    serial_seconds = time.perf_counter() - began

    workers = min(4, resolve_threads(0))
    began = time.perf_counter()
    parallel = [dumps_json(r) for r in map_instances(params, K, ctx.seed, sample_record, threads=workers)]
    parallel_seconds = time.perf_counter() - began
    speedup = serial_seconds / parallel_seconds if parallel_seconds > 0 else float("inf")

    identical = serial == parallel
    speedup_checked = workers >= 4 and not ctx.quick
    passed = (
        identical
        and single <= 1.0 * math.sqrt(ctx.divisor)
        and serial_seconds <= 60.0 / ctx.divisor * math.sqrt(ctx.divisor)
        and (not speedup_checked or speedup >= 3.0)
    )
    return passed, {
        "single_sample_seconds": single,
        "serial_samples": K,
        "serial_seconds": serial_seconds,
        "workers": workers,
        "speedup": speedup,
        "speedup_checked": speedup_checked,
        "identical_output": identical,
    }


def check_diagonal(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """m = n/2 on S': 2B + 4 genus sits at n, offset by 2 - 2I."""
    n = 2000
    params = ModelParams(ModelKind.SPRIME, n, n // 2)
    summary = sample_batch(params, ctx.samples(10 ** 4), ctx.child_seed(12))
    offset = (2 * summary.B + 4 * summary.genus - n).astype(np.float64)
    h_n, _ = harmonic_refs(n, exact=False)
    h_m, _ = harmonic_refs(n // 2, exact=False)
    expected = 2 - 2 * (h_n - h_m)
    mean = float(offset.mean())
    scaled = abs(mean) / math.sqrt(math.log(n))
    passed = _within(mean, expected, ctx.tol(0.1)) and scaled <= 1.0
    return passed, {
        "mean_offset": mean,
        "expected_offset": expected,
        "scaled_offset": scaled,
        "spread": float(offset.std(ddof=1)) if len(offset) > 1 else 0.0,
    }


def check_independence(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Fixed small m: the B-genus correlation matches its finite-size target."""
    params = ModelParams(ModelKind.SPRIME, 10 ** 4, 3)
    K = ctx.samples(10 ** 4)
    plan = ExperimentPlan(params, K, ctx.child_seed(13))
    summary = sample_batch(params, K, plan.master_seed)
    tally = MomentTally()
    tally.add_arrays(summary.B, summary.genus)
    report = tally.report()
    target = finite_size_targets(plan).corr_target
    corr = report.corr_BG if report.corr_BG is not None else float("nan")
    return _within(corr, target, ctx.tol(0.03)), {"K": K, "corr": report.corr_BG, "corr_target": target}


def check_restriction(ctx: SuiteContext) -> Tuple[bool, Detail]:
    """Exact parity law of a restricted fixed-parity permutation, N <= 7."""
    mismatches = []
    for N in range(2, 8):
        for m in range(2, N + 1):
            bias = restriction_parity_bias(m, N)
            for parity in ("even", "odd"):
                law = exact_restriction_law(N, m, parity)
                favoured = "even" if (parity == "even") == ((N - m) % 2 == 0) else "odd"
                expected = {
                    favoured: (1 + bias) / 2,
                    "odd" if favoured == "even" else "even": (1 - bias) / 2,
                }
                uniform = all(
                    len({p for q, p in law.items() if parity_of(q) == cls}) <= 1
                    for cls in ("even", "odd")
                )
                if exact_restriction_parity(N, m, parity) != expected or not uniform:
                    mismatches.append(f"N={N}, m={m}, {parity}")
    return not mismatches, {"mismatches": mismatches}


CRITERIA: Dict[str, Callable[[SuiteContext], Tuple[bool, Detail]]] = {
    "oracle": check_oracle,
    "euler": check_euler,
    "shortcut": check_shortcut,
    "parity": check_parity,
    "stirling": check_stirling,
    "theorem": check_theorem,
    "corollary": check_corollary,
    "connectivity": check_connectivity,
    "ribbon": check_ribbon,
    "gamma": check_gamma,
    "performance": check_performance,
    "diagonal": check_diagonal,
    "independence": check_independence,
    "restriction": check_restriction,
}


def run_suite(
    only: Optional[Iterable[str]] = None,
    quick: bool = False,
    seed: Optional[int] = None,
    threads: Union[int, str] = 1,
) -> List[Verdict]:
    """
    Run the acceptance criteria.

    Args:
        only: criterion ids to run (all when None)
        quick: reduced sample counts, widened statistical tolerances
        seed: master seed (settings.DEFAULT_SEED when None)
        threads: worker count for per-instance sampling

    Returns:
        One Verdict per criterion, in registry order
    """
    selected = list(CRITERIA) if only is None else list(only)
    unknown = [c for c in selected if c not in CRITERIA]
    if unknown:
        raise GluingError(f"Unknown criteria: {', '.join(unknown)}; known: {', '.join(CRITERIA)}")
    ctx = SuiteContext(seed=settings.DEFAULT_SEED if seed is None else seed, quick=quick, threads=threads)
    verdicts = []
    for criterion in selected:
        began = time.perf_counter()
        try:
            passed, detail = CRITERIA[criterion](ctx)
        except Exception as e:
            logger.exception("Criterion crashed - id: %s", criterion)
            passed, detail = False, {"error": f"{type(e).__name__}: {e}"}
        seconds = time.perf_counter() - began
        logger.info("Criterion finished - id: %s, passed: %s, seconds: %.2f", criterion, passed, seconds)
        verdicts.append(Verdict(id=criterion, passed=bool(passed), detail=detail, seconds=seconds))
    return verdicts
