import numpy as np
import pytest

from conelq.errors import SchemaError
from conelq.model import TimeGrid
from conelq.riccati import assemble, extract_policy, value_at
from conelq.simulate import (
    _path_rng,
    _run_paths,
    cumulative_intensity,
    mc_cost,
    mc_terminal_moments,
    sample_default,
    simulate_path,
)
from conelq.verify import scale_policy

from conftest import make_nojump, make_problem


@pytest.fixture(scope="module")
def solved():
    problem = make_problem(n=100)
    sol = assemble(problem)
    return problem, sol, extract_policy(problem, sol)


# ------------------------------------------------------------ default time


def test_cumulative_intensity_trapezoid():
    grid = TimeGrid(1.0, 4)
    clam = cumulative_intensity(np.array([0.0, 1.0, 2.0, 3.0, 4.0]), grid)
    np.testing.assert_allclose(clam, [0.0, 0.125, 0.5, 1.125, 2.0], atol=1e-15)
    with pytest.raises(SchemaError):
        cumulative_intensity(np.array([1.0, -0.5, 0.0, 0.0, 0.0]), grid)
    with pytest.raises(SchemaError):
        cumulative_intensity(np.ones(3), grid)


def test_default_frequency_matches_survival_law():
    # constant intensity: P(default before T) = 1 - exp(-lam T)
    grid = TimeGrid(1.0, 50)
    lam = np.full(51, 0.3)
    rng = np.random.default_rng(17)
    draws = 20_000
    hits = sum(sample_default(lam, grid, rng) is not None for _ in range(draws))
    p = 1.0 - np.exp(-0.3)
    se = np.sqrt(p * (1.0 - p) / draws)
    assert abs(hits / draws - p) <= 3.5 * se


def test_default_times_lie_on_continuous_scale():
    grid = TimeGrid(1.0, 20)
    lam = np.full(21, 2.0)
    rng = np.random.default_rng(4)
    taus = [sample_default(lam, grid, rng) for _ in range(200)]
    taus = [t for t in taus if t is not None]
    assert all(0.0 < t <= 1.0 for t in taus)
    # interpolation inside steps: most draws are strictly off-grid
    off = sum(min(abs(t / grid.step - round(t / grid.step)), 1.0) > 1e-9 for t in taus)
    assert off > len(taus) * 0.9


# ------------------------------------------------------------ single paths


def test_jump_accounting_is_exact(solved):
    problem, _, policy = solved
    hit = False
    for idx in range(12):
        rec = simulate_path(problem, policy, 1.0, _path_rng(11, idx))
        assert rec.times.size == problem.n + 1
        assert rec.X.shape == (problem.n + 1,)
        assert rec.u.shape == (problem.n + 1, problem.m)
        if rec.jump_node is None:
            assert rec.tau is None and rec.state_before_jump is None
            continue
        hit = True
        assert 0.0 < rec.tau <= problem.grid.horizon
        xl = rec.state_before_jump
        rebuilt = xl + rec.jump_e * xl + float(rec.jump_f @ rec.u[rec.jump_node - 1])
        assert rec.X[rec.jump_node] == rebuilt  # engine replay, bitwise
    assert hit


def test_cost_recomputes_from_path_without_jump():
    problem = make_nojump(n=64)
    sol = assemble(problem)
    policy = extract_policy(problem, sol)
    rec = simulate_path(problem, policy, 1.3, _path_rng(3, 0))
    assert rec.jump_node is None
    h = problem.grid.step
    q = problem.pre.q
    r = problem.pre.r[:, 0, 0]
    manual = (
        0.5 * h * float(q[:-1] @ rec.X[:-1] ** 2)
        + 0.5 * h * float(r[:-1] @ rec.u[:-1, 0] ** 2)
        + 0.5 * problem.terminal.g0 * rec.X[-1] ** 2
    )
    assert rec.cost == pytest.approx(manual, rel=1e-12)
    # the terminal row carries no control
    np.testing.assert_array_equal(rec.u[-1], 0.0)


# ------------------------------------------------------------ batch engine


def test_block_size_does_not_change_results(solved):
    problem, _, policy = solved
    a = _run_paths(problem, policy, 1.0, 300, 11, block=37)
    b = _run_paths(problem, policy, 1.0, 300, 11, block=4096)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_batch_matches_single_path_streams(solved):
    problem, _, policy = solved
    costs, _ = _run_paths(problem, policy, 1.0, 8, 11)
    singles = [
        simulate_path(problem, policy, 1.0, _path_rng(11, i)).cost for i in range(8)
    ]
    np.testing.assert_array_equal(costs, singles)


def test_mc_cost_deterministic_in_seed(solved):
    problem, _, policy = solved
    a = mc_cost(problem, policy, 1.0, 500, 42)
    b = mc_cost(problem, policy, 1.0, 500, 42)
    c = mc_cost(problem, policy, 1.0, 500, 43)
    assert (a.mean, a.se) == (b.mean, b.se)
    assert a.mean != c.mean
    assert a.paths == 500 and a.seed == 42


def test_mc_cost_rejects_degenerate_sampling(solved):
    problem, _, policy = solved
    with pytest.raises(SchemaError):
        mc_cost(problem, policy, 1.0, 1, 42)
    with pytest.raises(SchemaError):
        mc_cost(problem, policy, 1.0, 100, -3)


# --------------------------------------------------------------- estimates


def test_value_consistency_both_branches(solved):
    problem, sol, policy = solved
    for x0 in (1.0, -1.0):
        est = mc_cost(problem, policy, x0, 20_000, 42)
        value = value_at(sol, 0.0, x0)
        z = (est.mean - value) / est.se
        assert abs(z) <= 3.0


def test_terminal_moments_match_exact_discrete_law():
    # null policy, no jump: X_T is a product of independent one-step factors
    # whose discrete mean and variance are known in closed form
    problem = make_nojump(n=64)
    policy = scale_policy(extract_policy(problem, assemble(problem)), 0.0)
    mom = mc_terminal_moments(problem, policy, 1.0, 20_000, 8)
    h, n = problem.grid.step, problem.n
    a, c = 0.05, 0.15
    exact_mean = (1.0 + a * h) ** n
    exact_var = ((1.0 + a * h) ** 2 + c * c * h) ** n - exact_mean**2
    assert abs(mom.mean.mean - exact_mean) <= 3.0 * mom.mean.se
    assert abs(mom.variance.mean - exact_var) <= 3.0 * mom.variance.se
    assert mom.mean.paths == 20_000 and mom.variance.seed == 8
