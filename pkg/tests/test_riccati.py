import numpy as np
import pytest

from conelq.errors import BlowUp
from conelq.model import CaseClass, ConeKind
from conelq.riccati import (
    assemble,
    blowup_ceiling,
    extract_policy,
    solve_post_default,
    value_at,
)
from conelq.verify import classical_riccati_reference

from conftest import make_nojump, make_problem, random_constants


@pytest.fixture(scope="module")
def jump_solution():
    problem = make_problem(n=120)
    return problem, assemble(problem)


# ----------------------------------------------------------- no-jump limit


def test_matches_classical_riccati():
    rng = np.random.default_rng(7)
    for _ in range(3):
        kw = random_constants(rng)
        kw.update(lam=0.0, e=0.0, f=0.0)
        problem = make_nojump(n=300, **kw)
        sol = assemble(problem)
        ref = classical_riccati_reference(problem)
        rel = np.max(np.abs(sol.P0 - ref) / np.maximum(np.abs(ref), 1e-12))
        assert rel <= 1e-8
        rel_n = np.max(np.abs(sol.N0 - ref) / np.maximum(np.abs(ref), 1e-12))
        assert rel_n <= 1e-8


def test_nojump_curves_ignore_post_coefficients():
    # with intensity 0 the pre-default pair must be bitwise independent of
    # everything behind the jump
    base = make_nojump(n=60)
    other = make_nojump(n=60, pa=0.9, pb=-0.7, pc=0.3, pd=1.1, pq=0.8, pr=1.3,
                        g1=2.4)
    sa, sb = assemble(base), assemble(other)
    np.testing.assert_array_equal(sa.P0, sb.P0)
    np.testing.assert_array_equal(sa.N0, sb.N0)
    pa_, pb_ = extract_policy(base, sa), extract_policy(other, sb)
    np.testing.assert_array_equal(pa_.xi0_plus, pb_.xi0_plus)
    np.testing.assert_array_equal(pa_.xi0_minus, pb_.xi0_minus)


# ------------------------------------------------------- separable instance


def _separable(n: int):
    return make_nojump(n=n, a=0.0, b=1.0, c=0.0, d=1.0, q=0.0, r=1.0,
                       g0=1.0, g1=1.0, cone=ConeKind.FULL_SPACE)


def _separable_residual(n: int) -> float:
    problem = _separable(n)
    sol = assemble(problem)
    t = problem.grid.nodes
    lhs = np.log(sol.P0) - 1.0 / sol.P0
    return float(np.max(np.abs(lhs - (t - problem.grid.horizon - 1.0))))


def test_separable_closed_form():
    assert _separable_residual(100) <= 1e-8


def test_grid_convergence_order():
    errs = [_separable_residual(n) for n in (25, 50, 100)]
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.5


# ------------------------------------------------------------ jump solves


def test_fullspace_symmetry_and_cone_monotonicity():
    rng = np.random.default_rng(21)
    kw = random_constants(rng)
    free = make_problem(n=120, cone=ConeKind.FULL_SPACE, **kw)
    caged = make_problem(n=120, cone=ConeKind.NONNEG_ORTHANT, **kw)
    sf, sc = assemble(free), assemble(caged)
    assert np.max(np.abs(sf.P0 - sf.N0)) <= 1e-8
    assert float(np.nanmax(np.abs(sf.P1 - sf.N1))) <= 1e-8
    assert np.min(sc.P0 - sf.P0) >= -1e-10
    assert np.min(sc.N0 - sf.N0) >= -1e-10


def test_solution_structure(jump_solution):
    problem, sol = jump_solution
    n = problem.n
    assert sol.case is CaseClass.STANDARD
    assert sol.P0[-1] == problem.terminal.g0
    assert sol.N0[-1] == problem.terminal.g0
    # triangles: finite at and below the diagonal, NaN strictly above
    tri = np.tril_indices(n + 1)
    assert np.all(np.isfinite(sol.P1[tri]))
    assert np.all(np.isnan(sol.P1[np.triu_indices(n + 1, k=1)]))
    np.testing.assert_array_equal(np.diagonal(sol.P1), sol.diagP)
    np.testing.assert_array_equal(np.diagonal(sol.N1), sol.diagN)
    # jump integrands are the pasted differences
    np.testing.assert_allclose(sol.Zbar, sol.diagP - sol.P0, rtol=0.0, atol=1e-12)
    np.testing.assert_allclose(sol.Lambdabar, sol.diagN - sol.N0, rtol=0.0, atol=1e-12)
    assert np.all(sol.P0 > 0.0) and np.all(sol.N0 > 0.0)


def test_post_slice_matches_triangle(jump_solution):
    problem, sol = jump_solution
    theta = problem.grid.nodes[40]
    sl = solve_post_default(problem, theta)
    rows = np.arange(40, problem.n + 1)
    np.testing.assert_allclose(sl.P[rows - 40], sol.P1[rows, 40], rtol=1e-10)


def test_value_at_piecewise_quadratic(jump_solution):
    problem, sol = jump_solution
    T = problem.grid.horizon
    g0 = problem.terminal.g0
    assert value_at(sol, T, 2.0) == pytest.approx(0.5 * g0 * 4.0, rel=1e-12)
    assert value_at(sol, 0.0, 1.0) == pytest.approx(0.5 * sol.P0[0], rel=1e-12)
    assert value_at(sol, 0.0, -1.0) == pytest.approx(0.5 * sol.N0[0], rel=1e-12)
    assert value_at(sol, 0.0, 0.0) == 0.0
    # post phase reads the triangle at (t, theta)
    t, theta = problem.grid.nodes[80], problem.grid.nodes[30]
    assert value_at(sol, t, 1.0, phase="post", theta=theta) == pytest.approx(
        0.5 * sol.P1[80, 30], rel=1e-12
    )
    assert value_at(sol, t, -3.0, phase="post", theta=theta) == pytest.approx(
        0.5 * 9.0 * sol.N1[80, 30], rel=1e-12
    )


def test_policy_structure(jump_solution):
    problem, sol = jump_solution
    policy = extract_policy(problem, sol)
    n, m = problem.n, problem.m
    assert policy.xi0_plus.shape == (n + 1, m)
    assert policy.xi1_plus.shape == (n + 1, n + 1, m)
    tri_hi = np.triu_indices(n + 1, k=1)
    assert np.all(np.isnan(policy.xi1_plus[tri_hi]))
    assert np.all(np.isnan(policy.xi1_minus[tri_hi]))
    lo = np.tril_indices(n + 1)
    assert np.all(np.isfinite(policy.xi1_plus[lo]))
    # orthant gains act inside the cone
    assert np.min(policy.xi0_plus) >= 0.0
    assert np.min(policy.xi0_minus) >= 0.0
    assert np.nanmin(policy.xi1_plus) >= 0.0


def test_singular_case_positivity():
    problem = make_problem(n=120, r=0.0, pr=0.0, d=1.0, pd=1.0)
    sol = assemble(problem)
    assert sol.case is CaseClass.SINGULAR
    assert sol.positivity_floor > 0.0
    assert np.min(sol.P0) >= sol.positivity_floor - 1e-12
    assert np.min(sol.N0) >= sol.positivity_floor - 1e-12


def test_blowup_guard():
    problem = make_problem(n=400, a=12.0, pa=12.0)
    assert blowup_ceiling(problem) == pytest.approx(3e8)  # 1e8 (1 + sup G)
    with pytest.raises(BlowUp, match="ceiling"):
        assemble(problem)
