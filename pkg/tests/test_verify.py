import numpy as np
import pytest

from conelq.errors import NonCoercive, SchemaError, ViolatedAssumption
from conelq.model import ConeKind
from conelq.riccati import assemble, extract_policy
from conelq.simulate import mc_cost
from conelq.verify import (
    CheckResult,
    _check_config_problem,
    _report,
    classical_riccati_reference,
    golden_section_max,
    policy_grid_oracle,
    run_suite,
    scale_policy,
)

from conftest import make_nojump, make_problem


# ------------------------------------------------------ classical reference


def test_classical_reference_preconditions():
    with pytest.raises(ViolatedAssumption):
        classical_riccati_reference(make_problem(n=20))  # jump active
    with pytest.raises(ViolatedAssumption):
        classical_riccati_reference(make_nojump(n=20, cone=ConeKind.NONNEG_ORTHANT))
    curve = np.linspace(0.1, 0.2, 21)
    with pytest.raises(ViolatedAssumption):
        classical_riccati_reference(make_nojump(n=20, a=curve))


def test_classical_reference_agrees_with_solver():
    problem = make_nojump(n=200)
    ref = classical_riccati_reference(problem)
    sol = assemble(problem)
    assert ref[-1] == problem.terminal.g0
    rel = np.max(np.abs(sol.P0 - ref) / np.abs(ref))
    assert rel <= 1e-8


# ------------------------------------------------------------- maximization


def test_golden_section_finds_parabola_peak():
    found = golden_section_max(lambda x: -(x - 1.3) ** 2, 0.0, 1.0)
    assert abs(found - 1.3) <= 1e-8


def test_golden_section_expands_bracket_far():
    found = golden_section_max(lambda x: -(x - 57.0) ** 2, 0.0, 1.0)
    assert abs(found - 57.0) <= 1e-6


def test_golden_section_rejects_unbounded():
    with pytest.raises(NonCoercive):
        golden_section_max(lambda x: x, 0.0, 1.0)


# ------------------------------------------------------------------ policy


def test_scale_policy_scales_every_table():
    problem = make_problem(n=30)
    policy = extract_policy(problem, assemble(problem))
    doubled = scale_policy(policy, 2.0)
    np.testing.assert_array_equal(doubled.xi0_plus, 2.0 * policy.xi0_plus)
    np.testing.assert_array_equal(doubled.xi0_minus, 2.0 * policy.xi0_minus)
    np.testing.assert_array_equal(doubled.xi1_plus, 2.0 * policy.xi1_plus)
    zero = scale_policy(policy, 0.0)
    assert not zero.xi0_plus.any()
    assert zero.grid is policy.grid and zero.cone is policy.cone


def test_grid_oracle_baseline_matches_production_engine():
    # a single grid point at multiplier 1 must reproduce mc_cost on the
    # very same per-path streams
    problem = make_problem(n=100)
    policy = extract_policy(problem, assemble(problem))
    est = mc_cost(problem, policy, 1.0, 256, 42)
    mults, best = policy_grid_oracle(
        problem, 1.0, np.array([1.0]), 256, 42, intervals=1
    )
    np.testing.assert_array_equal(mults, [1.0])
    assert best.mean == pytest.approx(est.mean, rel=1e-12)
    assert best.se == pytest.approx(est.se, rel=1e-9)


def test_grid_oracle_rejects_negative_gains_in_cone():
    problem = make_problem(n=40)
    with pytest.raises(ViolatedAssumption):
        policy_grid_oracle(problem, 1.0, np.array([-0.5, 1.0]), 64, 1)


def test_grid_oracle_tie_break_and_discrimination():
    # fully decoupled control: gains are zero, every multiplier ties and
    # the first lattice point wins
    flat = make_problem(n=40, b=0.0, d=0.0, e=0.0, f=0.0, pb=0.0, pd=0.0)
    mults, _ = policy_grid_oracle(flat, 1.0, np.array([0.0, 1.0]), 128, 3,
                                  intervals=2)
    np.testing.assert_array_equal(mults, [0.0, 0.0])
    # live coupling: the solver policy beats the null policy on every leg
    problem = make_problem(n=60)
    mults, _ = policy_grid_oracle(problem, 1.0, np.array([0.0, 1.0]), 256, 7,
                                  intervals=2)
    np.testing.assert_array_equal(mults, [1.0, 1.0])


# ------------------------------------------------------------------ runner


def test_config_problem_check_reports_validation_failure():
    good = _check_config_problem(make_problem(n=20))
    assert good.passed
    bad = _check_config_problem(make_problem(n=20, e=-2.0))
    assert not bad.passed
    assert "ViolatedAssumption" in bad.detail


def test_report_invariant():
    ok = CheckResult("a", True, 0.0, 1.0)
    ko = CheckResult("b", False, 9.0, 1.0)
    assert _report([ok, ok]).passed
    assert not _report([ok, ko]).passed


def test_run_suite_rejects_bad_config():
    with pytest.raises(SchemaError):
        run_suite({"grid": 100, "bogus": 1})
    with pytest.raises(SchemaError):
        run_suite({"paths": 1})
