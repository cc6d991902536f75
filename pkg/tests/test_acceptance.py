"""Acceptance battery: ten criteria, one test each.

The full suite runs once (module scope) at production scale: n = 1000,
10^5 Monte Carlo paths, seed 42. Each test asserts its criterion passed
and that the tolerance baked into the battery is the pinned one, so the
gate cannot drift silently. Run with -s to see the per-criterion lines.

Takes about a minute; everything else in tests/ stays fast.
"""

import pytest

from conelq.verify import run_suite


@pytest.fixture(scope="module")
def results():
    report = run_suite()
    by_name = {res.name: res for res in report.checks}
    by_name["__report__"] = report
    return by_name


def show(res):
    status = "PASS" if res.passed else "FAIL"
    line = f"{status}  {res.name:<24s} measured={res.measured:.3e}  tol={res.tolerance:.0e}"
    if res.detail:
        line += f"  ({res.detail})"
    print(line)


def criterion(results, name, tolerance):
    res = results[name]
    show(res)
    assert res.tolerance == tolerance
    assert res.passed, res.detail
    return res


def test_criterion_01_nojump_matches_classical_riccati(results):
    criterion(results, "01-nojump-classical", 1e-6)


def test_criterion_02_separable_ode_exact(results):
    criterion(results, "02-separable-exact", 1e-8)


def test_criterion_03_fullspace_symmetry(results):
    criterion(results, "03-fullspace-symmetry", 1e-8)


def test_criterion_04_cone_monotonicity(results):
    criterion(results, "04-cone-monotonicity", 1e-10)


def test_criterion_05_solution_bounds(results):
    res = criterion(results, "05-theorem-bounds", 1e-9)
    assert "singular floor" in res.detail


def test_criterion_06_hamiltonian_oracle_battery(results):
    res = criterion(results, "06-hamiltonian-oracle", 1e-6)
    assert "m=1, m=2" in res.detail


def test_criterion_07_value_matches_monte_carlo(results):
    res = criterion(results, "07-value-vs-mc", 3.0)
    # both initial states exercised: +1 prices P, -1 prices N
    assert "x0=+1" in res.detail and "x0=-1" in res.detail


def test_criterion_08_policy_dominance(results):
    criterion(results, "08-optimality-dominance", 3.0)


def test_criterion_09_mean_variance_frontier(results):
    res = criterion(results, "09-mv-frontier", 3.0)
    assert "zero-risk point exact: True" in res.detail


def test_criterion_10_degenerate_market_infeasible(results):
    res = criterion(results, "10-degenerate-market", 1e-8)
    assert "dual refusal=yes" in res.detail


def test_all_criteria_pass(results):
    report = results["__report__"]
    assert len(report.checks) == 10
    assert report.passed
