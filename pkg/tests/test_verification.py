import pytest

from app.core import gluing, verification
from app.core.errors import GluingError
from app.core.gluing import BoundaryTrace
from app.core.run_config import load_run_defaults
from app.core.verification import (
    CRITERIA,
    SuiteContext,
    Verdict,
    run_suite,
)


def test_registry_order():
    assert list(CRITERIA)[:3] == ["oracle", "euler", "shortcut"]
    assert list(CRITERIA)[-1] == "restriction"
    assert len(CRITERIA) == 14


def test_restriction_criterion_passes():
    (verdict,) = run_suite(only=["restriction"], seed=1)
    assert verdict.id == "restriction"
    assert verdict.passed, verdict.detail


def test_shortcut_criterion_passes_in_quick_mode():
    (verdict,) = run_suite(only=["shortcut"], quick=True, seed=2)
    assert verdict.passed, verdict.detail


def test_shortcut_criterion_catches_broken_walk(monkeypatch):
    real_walk = gluing.boundary_walk

    def shifted_walk(instance):
        trace = real_walk(instance)
        successor = (trace.successor + 1) % max(1, len(trace.successor))
        return BoundaryTrace(
            successor=successor,
            side_labels=trace.side_labels,
            total_boundary_vertices=trace.total_boundary_vertices,
        )

    monkeypatch.setattr(gluing, "boundary_walk", shifted_walk)
    (verdict,) = run_suite(only=["shortcut"], quick=True, seed=2)
    assert not verdict.passed
    assert verdict.detail["failures"]


def test_unknown_criterion():
    with pytest.raises(GluingError):
        run_suite(only=["nonsense"])


def test_crashing_criterion_becomes_failed_verdict(monkeypatch):
    def broken(ctx):
        raise RuntimeError("boom")

    monkeypatch.setitem(verification.CRITERIA, "ribbon", broken)
    (verdict,) = run_suite(only=["ribbon"], quick=True)
    assert not verdict.passed
    assert verdict.detail == {"error": "RuntimeError: boom"}


def test_suite_context_scaling():
    full = SuiteContext(seed=0)
    quick = SuiteContext(seed=0, quick=True)
    assert full.samples(10 ** 6) == 10 ** 6
    assert quick.samples(10 ** 6) == 10 ** 4
    assert quick.samples(1000) == 100
    assert quick.tol(0.01) == pytest.approx(0.1)
    assert full.child_seed(3) == SuiteContext(seed=0, quick=True).child_seed(3)
    assert full.child_seed(3) != full.child_seed(4)


def test_verdict_record():
    record = Verdict(id="euler", passed=True, detail={"models": 3}, seconds=0.5).as_record()
    assert record == {"id": "euler", "passed": True, "seconds": 0.5, "detail": {"models": 3}}


@pytest.mark.slow
def test_quick_suite_passes():
    verdicts = run_suite(quick=True, seed=20240611)
    failed = {v.id: v.detail for v in verdicts if not v.passed}
    assert not failed


def test_quick_divisor_comes_from_run_defaults(monkeypatch):
    monkeypatch.setattr(load_run_defaults(), "quick_divisor", 10)
    quick = SuiteContext(seed=0, quick=True)
    assert quick.samples(10 ** 4) == 1000
    assert quick.tol(0.01) == pytest.approx(0.01 * 10 ** 0.5)
