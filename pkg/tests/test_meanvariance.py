import numpy as np
import pytest

from conelq.errors import DegenerateDual, InfeasibleTarget, ViolatedAssumption
from conelq.model import CaseClass, ConeKind, TimeGrid, validate_problem
from conelq.meanvariance import (
    MarketSpec,
    dual_value,
    embed,
    embedded_solution,
    feasibility_check,
    frontier,
    optimal_eta,
    rate_integral,
)


def make_market(n=200, shorting=False, **over):
    kw = dict(r=0.02, b0=0.08, sigma0=0.2, gamma=0.3, lam=0.3, b1=0.05,
              sigma1=0.25, x0=1.0)
    kw.update(over)
    return MarketSpec.build(TimeGrid(1.0, n), shorting=shorting, **kw)


@pytest.fixture(scope="module")
def market():
    return make_market()


def degenerate_market(n=100):
    # stock earns exactly the risk-free rate and default costs nothing
    return make_market(n=n, b0=0.02, b1=0.02, gamma=0.0)


# ----------------------------------------------------------------- builder


def test_build_broadcasts_and_validates(market):
    n = market.grid.n
    assert market.r.shape == (n + 1,)
    assert market.sigma0.shape == (n + 1, 1)
    assert market.cone.is_orthant  # no shorting
    assert make_market(shorting=True).cone.kind is ConeKind.FULL_SPACE
    with pytest.raises(ViolatedAssumption, match="sigma"):
        make_market(sigma0=0.0)
    with pytest.raises(ViolatedAssumption, match="lambda"):
        make_market(lam=-0.2)


def test_rate_integral_is_exact_for_constant_rate(market):
    assert rate_integral(market) == pytest.approx(0.02, abs=1e-15)


# ------------------------------------------------------------ worked dual


def test_dual_worked_example():
    # flat zero rate and a pinned N0 = 1/2: eta* = 3 and J* = 1 at z = 2
    mkt = make_market(n=50, r=0.0)
    pair = (np.array([1.0]), np.array([0.5]))
    eta = optimal_eta(mkt, 2.0, pair=pair)
    assert eta == pytest.approx(3.0, abs=1e-14)
    assert dual_value(mkt, eta, 2.0, pair=pair) == pytest.approx(1.0, abs=1e-14)
    # maximality: nearby multipliers do worse
    for d in (-0.5, -1e-3, 1e-3, 0.5):
        assert dual_value(mkt, eta + d, 2.0, pair=pair) < 1.0


# --------------------------------------------------------------- embedding


def test_embedding_is_singular_case(market):
    problem, y0 = embed(market, 2.0)
    assert validate_problem(problem).case is CaseClass.SINGULAR
    assert np.all(problem.pre.q == 0.0) and np.all(problem.pre.r == 0.0)
    assert problem.terminal.g0 == 1.0
    np.testing.assert_array_equal(problem.pre.a, market.r)
    np.testing.assert_array_equal(problem.pre.f[:, 0], -market.gamma)
    assert y0 == pytest.approx(1.0 - 2.0 * np.exp(-0.02), rel=1e-15)


def test_frontier_matches_dual_and_is_monotone(market):
    problem, sol = embedded_solution(market)
    pair = (sol.P0, sol.N0)
    xear = market.x0 * np.exp(rate_integral(market))
    targets = [xear, 1.05, 1.1, 1.3]
    points = frontier(market, targets)

    # the zero-risk endpoint is exact
    p0 = points[0]
    assert p0.eta_star == xear
    assert p0.J_star == 0.0
    assert p0.y0 == 0.0

    for pt in points[1:]:
        assert pt.J_star == pytest.approx(
            dual_value(market, pt.eta_star, pt.z, pair=pair), rel=1e-9, abs=1e-12
        )
    J = [pt.J_star for pt in points]
    eta = [pt.eta_star for pt in points]
    assert all(a < b for a, b in zip(J, J[1:]))
    assert all(a < b for a, b in zip(eta, eta[1:]))


def test_golden_section_agrees_with_closed_form(market):
    from conelq.verify import golden_section_max

    pair = None
    z = 1.1
    eta = optimal_eta(market, z)
    lo, hi = z, z + 4.0 * (eta - z) + 1.0
    found = golden_section_max(lambda e: dual_value(market, e, z), lo, hi)
    assert abs(found - eta) <= 1e-6


# ------------------------------------------------------------- degeneracy


def test_feasibility_mass(market):
    feas = feasibility_check(market)
    # pre-default excess return is negative here (b0 - r < lam gamma), so
    # all the mass comes from the post-default channel
    assert feas.feasible and feas.mass > 1e-3
    dfeas = feasibility_check(degenerate_market())
    assert not dfeas.feasible
    assert dfeas.mass == 0.0


def test_degenerate_market_refuses_dual():
    dm = degenerate_market()
    _, sol = embedded_solution(dm)
    kappa = sol.N0[0] * np.exp(-2.0 * rate_integral(dm))
    assert abs(kappa - 1.0) <= 1e-8
    with pytest.raises(DegenerateDual):
        optimal_eta(dm, 1.5)
    with pytest.raises(DegenerateDual):
        frontier(dm, [1.5])


def test_infeasible_target_rejected(market):
    with pytest.raises(InfeasibleTarget):
        optimal_eta(market, 0.9)
