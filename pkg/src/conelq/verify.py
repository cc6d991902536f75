"""Independent oracles and the acceptance-suite runner.

Everything asserted here is re-derived through a route that shares no solver
code with the module under test: a fresh Runge-Kutta march on the explicit
unconstrained Riccati reduction, exhaustive lattice scans of the four
Hamiltonians, a brute-force feedback-policy search on common random numbers,
and plain Monte Carlo moment matching.  Deterministic cross-checks use a
1e-6 tolerance; Monte Carlo checks use three standard errors.

The checks are pure functions of (grid, paths, seed) and are independent of
one another, so they may be run concurrently; the runner executes them in a
fixed order and the report is deterministic either way.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConelqError, NonCoercive, SchemaError, ViolatedAssumption
from .model import (
    CaseClass,
    ConeKind,
    ConeSpec,
    LQProblem,
    PostDefaultCoeffs,
    PreDefaultCoeffs,
    TerminalWeights,
    TimeGrid,
    coefficient_at,
)
from .hamiltonian import HamiltonianInput, grid_oracle_min, minimize_h_post, minimize_h_pre
from .riccati import FeedbackPolicy, assemble, extract_policy, value_at
from .simulate import MCEstimate, mc_cost, mc_terminal_moments
from . import meanvariance as mv


@dataclass(frozen=True)
class CheckResult:
    """One acceptance check: the measured figure against its tolerance."""

    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]
    passed: bool


def _report(checks) -> VerificationReport:
    checks = tuple(checks)
    return VerificationReport(checks, all(c.passed for c in checks))


# ---------------------------------------------------------------------------
# classical reference for the no-jump unconstrained case


def classical_riccati_reference(problem: LQProblem) -> np.ndarray:
    """Reference P curve for a constant-coefficient, no-jump, full-space
    instance.

    Marches dP/dt = -(2AP + Q + P|C|^2 - v' S^{-1} v), S = R + P D'D,
    v = P(B + D'C), backward from P(T) = G0 with classical fourth-order
    Runge-Kutta at one tenth of the grid step.  This is the textbook scalar
    reduction with the infimum substituted in closed form; nothing is shared
    with the production integrator.
    """
    pre = problem.pre
    if float(np.max(np.abs(pre.lam))) != 0.0:
        raise ViolatedAssumption("classical reference requires lambda = 0")
    if problem.cone.kind is not ConeKind.FULL_SPACE:
        raise ViolatedAssumption("classical reference requires the full-space cone")
    for name in ("a", "b", "c", "d", "q", "r"):
        arr = getattr(pre, name)
        if float(np.max(np.abs(arr - arr[0]))) != 0.0:
            raise ViolatedAssumption(f"classical reference requires constant {name}")

    a = float(pre.a[0])
    b = pre.b[0]
    c = pre.c[0]
    d = pre.d[0]
    q = float(pre.q[0])
    r = pre.r[0]
    m = problem.cone.dim
    scalar = m == 1 and problem.brownian_dim == 1

    if scalar:
        b0, c0, d0, r0 = float(b[0]), float(c[0]), float(d[0, 0]), float(r[0, 0])

        def f(p: float) -> float:
            s = r0 + p * d0 * d0
            if s <= 0.0:
                raise NonCoercive(f"R + P D'D = {s:g} not positive")
            v = p * (b0 + d0 * c0)
            return -(2.0 * a * p + q + p * c0 * c0 - v * v / s)

    else:
        dtd = d.T @ d
        bc = b + d.T @ c
        cc = float(c @ c)

        def f(p: float) -> float:
            s = r + p * dtd
            try:
                L = np.linalg.cholesky(s)
            except np.linalg.LinAlgError:
                raise NonCoercive("R + P D'D not positive definite") from None
            v = p * bc
            w = np.linalg.solve(L, v)
            return -(2.0 * a * p + q + p * cc - float(w @ w))

    n, h = problem.grid.n, problem.grid.step
    sub = h / 10.0
    out = np.empty(n + 1)
    out[n] = problem.terminal.g0
    p = float(problem.terminal.g0)
    for i in range(n, 0, -1):
        for _ in range(10):
            k1 = f(p)
            k2 = f(p - 0.5 * sub * k1)
            k3 = f(p - 0.5 * sub * k2)
            k4 = f(p - sub * k3)
            p -= sub / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i - 1] = p
    return out


# ---------------------------------------------------------------------------
# policy perturbation and dual-maximizer oracles


def scale_policy(policy: FeedbackPolicy, factor: float) -> FeedbackPolicy:
    """All four gain tables multiplied by one factor.  Nonnegative factors
    keep an orthant policy admissible; the caller owns that choice."""
    return replace(
        policy,
        xi0_plus=policy.xi0_plus * factor,
        xi0_minus=policy.xi0_minus * factor,
        xi1_plus=policy.xi1_plus * factor,
        xi1_minus=policy.xi1_minus * factor,
    )


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> float:
    """Maximizer of a concave scalar function on [lo, infinity).

    The right end is pushed out (doubling the width) until f decreases into
    it, so an initial bracket that is too small cannot clip the maximizer.
    """
    if not hi > lo:
        raise SchemaError("golden section needs hi > lo")
    width = hi - lo
    for _ in range(120):
        probe = hi - 0.381966011 * (hi - lo)
        if f(hi) < f(probe):
            break
        width *= 2.0
        hi = lo + width
    else:
        raise NonCoercive("no interior maximum found while expanding the bracket")

    lo0 = lo
    inv = 0.6180339887498949
    x1 = hi - inv * (hi - lo)
    x2 = lo + inv * (hi - lo)
    f1, f2 = f(x1), f(x2)
    span = tol * (1.0 + abs(lo) + abs(hi))
    while hi - lo > span:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv * (hi - lo)
            f1 = f(x1)
    x = 0.5 * (lo + hi)

    # a flat objective drowns golden-scale comparisons in rounding noise;
    # one parabolic fit through well-separated points recovers the vertex
    delta = max(0.02 * width, 64.0 * span)
    p0 = max(lo0, x - delta)
    p1 = p0 + delta
    f0, f1, f2 = f(p0), f(p1), f(p1 + delta)
    curve = f0 - 2.0 * f1 + f2
    if curve < 0.0:
        v = p1 - delta * (f2 - f0) / (2.0 * curve)
        if p0 <= v <= p1 + delta:
            return v
    return x


def policy_grid_oracle(
    problem: LQProblem,
    x0: float,
    gain_grid,
    paths: int,
    seed: int,
    intervals: int = 4,
) -> tuple[np.ndarray, MCEstimate]:
    """Brute-force optimality witness.

    Splits [0, T] into equal intervals and applies one multiplier per
    interval to the solved feedback gains; every combination from gain_grid
    is evaluated exhaustively by Monte Carlo on common random numbers (the
    same default times and Brownian increments for every candidate), with a
    self-contained vectorized Euler engine.  Returns the best multiplier
    vector and its cost estimate.

    Deliberately desk-scale: scalar control only, at most 4 intervals and
    11 grid points, so the search stays exhaustive.
    """
    grid = problem.grid
    n, h, m = grid.n, grid.step, problem.cone.dim
    if m != 1 or problem.brownian_dim != 1:
        raise SchemaError("policy oracle supports scalar control and noise only")
    if not 1 <= intervals <= 4:
        raise SchemaError("policy oracle supports at most 4 intervals")
    gain_grid = np.asarray(gain_grid, dtype=float)
    if gain_grid.ndim != 1 or gain_grid.size < 1 or gain_grid.size > 11:
        raise SchemaError("gain grid must hold 1..11 points")
    if paths < 2:
        raise SchemaError(f"need at least 2 paths, got {paths}")
    if problem.cone.is_orthant and float(gain_grid.min()) < 0.0:
        raise ViolatedAssumption("negative multipliers leave the orthant")

    policy = extract_policy(problem, assemble(problem))
    pre = problem.pre
    nodes = grid.nodes
    sqh = np.sqrt(h)

    # common random numbers: one exponential then n normals per path, the
    # same stream keying the production engine documents
    theta = np.empty(paths)
    zmat = np.empty((paths, n))
    for p in range(paths):
        rng = np.random.Generator(np.random.Philox(key=[seed, p]))
        theta[p] = max(rng.standard_exponential(), 5e-324)
        zmat[p] = rng.standard_normal(n)

    lam = pre.lam
    clam = np.concatenate(([0.0], np.cumsum(0.5 * (lam[1:] + lam[:-1]) * h)))
    jnode = np.searchsorted(clam, theta, side="left")
    live = jnode <= n
    inc = np.where(live, clam[np.minimum(jnode, n)] - clam[np.maximum(jnode, 1) - 1], 1.0)
    frac = np.where(live, (theta - clam[np.maximum(jnode, 1) - 1]) / inc, 0.0)
    tau = np.where(live, (np.maximum(jnode, 1) - 1 + frac) * h, np.inf)
    jnode = np.where(live, jnode, n + 1)

    # per-path step data, policy independent: effective drift/vol/cost rows
    # and gain rows, pre-default columns shared, post-default gathered at tau
    taud = np.where(live, np.where(np.isfinite(tau), tau, 0.0), 0.0)
    acur = np.empty((n, paths))
    bcur = np.empty((n, paths))
    ccur = np.empty((n, paths))
    dcur = np.empty((n, paths))
    qcur = np.empty((n, paths))
    rcur = np.empty((n, paths))
    gpcur = np.empty((n, paths))
    gmcur = np.empty((n, paths))

    y = np.clip(taud / h, 0.0, float(n))
    j0 = np.minimum(y.astype(int), n - 1)
    v = y - j0
    x1p = policy.xi1_plus[:, :, 0]
    x1m = policy.xi1_minus[:, :, 0]

    steps = np.arange(n)
    post_mask = steps[:, None] >= jnode[None, :]
    for i in range(n):
        sel = post_mask[i]
        if not np.any(sel):
            acur[i] = pre.a[i] - lam[i] * pre.e[i]
            bcur[i] = pre.b[i, 0] - lam[i] * pre.f[i, 0]
            ccur[i] = pre.c[i, 0]
            dcur[i] = pre.d[i, 0, 0]
            qcur[i] = pre.q[i]
            rcur[i] = pre.r[i, 0, 0]
            gpcur[i] = policy.xi0_plus[i, 0]
            gmcur[i] = policy.xi0_minus[i, 0]
            continue
        th = taud[sel]
        post = problem.post
        acur[i] = pre.a[i] - lam[i] * pre.e[i]
        bcur[i] = pre.b[i, 0] - lam[i] * pre.f[i, 0]
        ccur[i] = pre.c[i, 0]
        dcur[i] = pre.d[i, 0, 0]
        qcur[i] = pre.q[i]
        rcur[i] = pre.r[i, 0, 0]
        acur[i, sel] = post.a.at_node_theta(grid, i, th).reshape(-1)
        bcur[i, sel] = post.b.at_node_theta(grid, i, th).reshape(-1)
        ccur[i, sel] = post.c.at_node_theta(grid, i, th).reshape(-1)
        dcur[i, sel] = post.d.at_node_theta(grid, i, th).reshape(-1)
        qcur[i, sel] = post.q.at_node_theta(grid, i, th).reshape(-1)
        rcur[i, sel] = post.r.at_node_theta(grid, i, th).reshape(-1)
        gp1 = (1.0 - v[sel]) * x1p[i, j0[sel]] + v[sel] * x1p[i, j0[sel] + 1]
        gm1 = (1.0 - v[sel]) * x1m[i, j0[sel]] + v[sel] * x1m[i, j0[sel] + 1]
        gpcur[i] = policy.xi0_plus[i, 0]
        gmcur[i] = policy.xi0_minus[i, 0]
        gpcur[i, sel] = gp1
        gmcur[i, sel] = gm1

    # fold the increments into two per-step multipliers:
    # X <- X * xco + u * uco, cost <- cost + qh X^2 + rh u^2
    xco = 1.0 + acur * h + ccur * sqh * zmat.T
    uco = bcur * h + dcur * sqh * zmat.T
    qh = 0.5 * qcur * h
    rh = 0.5 * rcur * h

    etau = np.interp(taud, nodes, pre.e)
    ftau = np.interp(taud, nodes, pre.f[:, 0])
    gterm = np.where(live, np.interp(taud, nodes, problem.terminal.g1), problem.terminal.g0)
    crossing = np.where(live, jnode - 1, -1)

    iv = np.minimum((steps * intervals) // n, intervals - 1)
    combos = np.array(list(itertools.product(gain_grid, repeat=intervals)))
    best_mean = np.inf
    best_se = 0.0
    best_row = combos[0]

    chunk = max(1, int(2_000_000 // max(paths, 1)))
    for start in range(0, len(combos), chunk):
        mult = combos[start : start + chunk]
        x = np.full((len(mult), paths), float(x0))
        cost = np.zeros_like(x)
        for i in range(n):
            xp = np.maximum(x, 0.0)
            u = mult[:, iv[i], None] * (gpcur[i] * xp + gmcur[i] * (xp - x))
            cost += qh[i] * x * x + rh[i] * u * u
            x = x * xco[i] + u * uco[i]
            hit = crossing == i
            if np.any(hit):
                x[:, hit] += etau[hit] * x[:, hit] + ftau[hit] * u[:, hit]
        cost += 0.5 * gterm * x * x
        means = cost.mean(axis=1)
        j = int(np.argmin(means))
        if means[j] < best_mean:
            best_mean = float(means[j])
            best_se = float(cost[j].std(ddof=1) / np.sqrt(paths))
            best_row = mult[j]
    est = MCEstimate(mean=best_mean, se=best_se, paths=paths, seed=seed)
    return np.asarray(best_row, dtype=float), est


# ---------------------------------------------------------------------------
# canonical instances


def _constants(grid: TimeGrid, cone: ConeKind, prec: dict, postc: dict,
               g0: float, g1: float) -> LQProblem:
    pre = PreDefaultCoeffs.build(grid, 1, 1, **prec)
    post = PostDefaultCoeffs.constants(grid, 1, 1, **postc)
    term = TerminalWeights.build(grid, g0, g1)
    return LQProblem(grid, ConeSpec(cone, 1), 1, pre, post, term)


def _rand_nojump(rng: np.random.Generator, grid: TimeGrid) -> LQProblem:
    prec = dict(
        a=rng.uniform(-1.0, 1.0),
        b=[rng.uniform(-1.0, 1.0)],
        c=[rng.uniform(-0.5, 0.5)],
        d=[[rng.uniform(0.4, 1.2)]],
        e=0.0,
        f=[0.0],
        q=rng.uniform(0.0, 1.0),
        r=[[rng.uniform(0.3, 1.5)]],
        lam=0.0,
    )
    postc = dict(a=0.0, b=[0.0], c=[0.0], d=[[1.0]], q=0.0, r=[[1.0]])
    g0 = rng.uniform(0.5, 2.0)
    return _constants(grid, ConeKind.FULL_SPACE, prec, postc, g0, g0)


def _rand_jump(rng: np.random.Generator, grid: TimeGrid, cone: ConeKind) -> LQProblem:
    prec = dict(
        a=rng.uniform(-1.0, 1.0),
        b=[rng.uniform(-1.0, 1.0)],
        c=[rng.uniform(-0.5, 0.5)],
        d=[[rng.uniform(0.4, 1.2)]],
        e=rng.uniform(-0.8, 0.5),
        f=[rng.uniform(-1.0, 1.0)],
        q=rng.uniform(0.0, 1.0),
        r=[[rng.uniform(0.3, 1.5)]],
        lam=rng.uniform(0.2, 1.0),
    )
    postc = dict(
        a=rng.uniform(-1.0, 1.0),
        b=[rng.uniform(-1.0, 1.0)],
        c=[rng.uniform(-0.5, 0.5)],
        d=[[rng.uniform(0.4, 1.2)]],
        q=rng.uniform(0.0, 1.0),
        r=[[rng.uniform(0.3, 1.5)]],
    )
    return _constants(grid, cone, prec, postc, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.5))


def separable_instance(n: int) -> LQProblem:
    """A = 0, C = 0, Q = 0, B = D = R = G = 1: the no-jump flow collapses to
    a separable ODE whose solution satisfies ln P - 1/P = t - T - 1."""
    grid = TimeGrid(1.0, n)
    prec = dict(a=0.0, b=[1.0], c=[0.0], d=[[1.0]], e=0.0, f=[0.0],
                q=0.0, r=[[1.0]], lam=0.0)
    postc = dict(a=0.0, b=[1.0], c=[0.0], d=[[1.0]], q=0.0, r=[[1.0]])
    return _constants(grid, ConeKind.FULL_SPACE, prec, postc, 1.0, 1.0)


def jump_mc_instance(n: int) -> LQProblem:
    """The standard-case jump instance used by the Monte Carlo consistency
    and dominance checks: lambda = 0.3, E0 = -0.4, nonnegative controls,
    with both pre-default gain branches and the post-default plus branch
    active (the post drift loading is negative, so the post minus weight
    exceeds the plus weight and the minus branch survives the orthant)."""
    grid = TimeGrid(1.0, n)
    prec = dict(a=0.05, b=[0.0], c=[0.15], d=[[0.4]], e=-0.4, f=[1.2],
                q=0.6, r=[[0.4]], lam=0.3)
    postc = dict(a=-0.1, b=[-0.45], c=[0.1], d=[[0.5]], q=0.5, r=[[0.4]])
    return _constants(grid, ConeKind.NONNEG_ORTHANT, prec, postc, 1.0, 2.0)


def frontier_market(n: int) -> mv.MarketSpec:
    """The feasible defaultable market of the frontier check."""
    grid = TimeGrid(1.0, n)
    return mv.MarketSpec.build(
        grid, r=0.02, b0=0.08, sigma0=0.2, gamma=0.3, lam=0.3,
        b1=0.05, sigma1=0.25, x0=1.0, shorting=False,
    )


def degenerate_market(n: int) -> mv.MarketSpec:
    """b = r and gamma = 0 in both phases: no excess return anywhere."""
    grid = TimeGrid(1.0, n)
    return mv.MarketSpec.build(
        grid, r=0.02, b0=0.02, sigma0=0.2, gamma=0.0, lam=0.3,
        b1=0.02, sigma1=0.25, x0=1.0, shorting=False,
    )


# ---------------------------------------------------------------------------
# the ten checks


def _check_nojump_classical(n: int, seed: int, registry: list) -> CheckResult:
    rng = np.random.default_rng([seed, 1])
    grid = TimeGrid(1.0, n)
    t0 = time.perf_counter()
    worst = 0.0
    for idx in range(25):
        problem = _rand_nojump(rng, grid)
        sol = assemble(problem)
        registry.append((f"nojump-{idx}", problem, sol))
        ref = classical_riccati_reference(problem)
        err = np.max(np.abs(sol.P0 - ref) / np.abs(ref))
        err = max(err, np.max(np.abs(sol.N0 - ref) / np.abs(ref)))
        worst = max(worst, float(err))
    elapsed = time.perf_counter() - t0
    return CheckResult(
        name="01-nojump-classical",
        passed=worst <= 1e-6 and elapsed < 10.0,
        measured=worst,
        tolerance=1e-6,
        detail=f"25 instances, n={n}, {elapsed:.2f}s (budget 10s)",
    )


def _check_separable_exact(n: int, registry: list) -> CheckResult:
    problem = separable_instance(n)
    sol = assemble(problem)
    registry.append(("separable", problem, sol))
    t = problem.grid.nodes
    resid = np.log(sol.P0) - 1.0 / sol.P0 - (t - problem.grid.horizon - 1.0)
    worst = float(np.max(np.abs(resid)))
    return CheckResult(
        name="02-separable-exact",
        passed=worst <= 1e-8,
        measured=worst,
        tolerance=1e-8,
        detail=f"n={n}",
    )


def _check_symmetry_and_monotonicity(
    n: int, seed: int, registry: list
) -> tuple[CheckResult, CheckResult]:
    rng = np.random.default_rng([seed, 3])
    grid = TimeGrid(1.0, n)
    worst_sym = 0.0
    worst_mono = -np.inf
    for idx in range(25):
        state = rng.bit_generator.state
        free = _rand_jump(rng, grid, ConeKind.FULL_SPACE)
        rng.bit_generator.state = state
        caged = _rand_jump(rng, grid, ConeKind.NONNEG_ORTHANT)

        fs = assemble(free)
        registry.append((f"jump-free-{idx}", free, fs))
        sym = float(np.max(np.abs(fs.P0 - fs.N0)))
        tri = np.abs(fs.P1 - fs.N1)
        sym = max(sym, float(np.nanmax(tri)))
        worst_sym = max(worst_sym, sym)

        os_ = assemble(caged)
        registry.append((f"jump-orthant-{idx}", caged, os_))
        gap = max(float(np.max(fs.P0 - os_.P0)), float(np.max(fs.N0 - os_.N0)))
        worst_mono = max(worst_mono, gap)
    sym_res = CheckResult(
        name="03-fullspace-symmetry",
        passed=worst_sym <= 1e-8,
        measured=worst_sym,
        tolerance=1e-8,
        detail=f"25 jump instances, n={n}",
    )
    mono_res = CheckResult(
        name="04-cone-monotonicity",
        passed=worst_mono <= 1e-10,
        measured=worst_mono,
        tolerance=1e-10,
        detail="orthant curves dominate full-space curves node-wise",
    )
    return sym_res, mono_res


def _check_theorem_bounds(registry: list) -> CheckResult:
    worst = -np.inf
    floor = np.inf
    for _, problem, sol in registry:
        curves = (sol.P0, sol.N0, sol.diagP, sol.diagN)
        low = min(float(np.min(c)) for c in curves)
        if sol.case is CaseClass.SINGULAR:
            floor = min(floor, low)
            worst = max(worst, -low)  # uniform positivity: low must stay > 0
        else:
            worst = max(worst, -low)  # nonnegativity
        sup_p = max(float(np.max(sol.P0)), float(np.max(sol.diagP)))
        sup_n = max(float(np.max(sol.N0)), float(np.max(sol.diagN)))
        worst = max(worst, float(np.max(np.abs(sol.Zbar))) - 2.0 * sup_p)
        worst = max(worst, float(np.max(np.abs(sol.Lambdabar))) - 2.0 * sup_n)
        worst = max(worst, -float(np.min(sol.Zbar + sol.P0)))
        worst = max(worst, -float(np.min(sol.Lambdabar + sol.N0)))
    singular = "none solved" if floor is np.inf else f"c={floor:.3e}"
    return CheckResult(
        name="05-theorem-bounds",
        passed=worst <= 1e-9 and (floor is np.inf or floor > 0.0),
        measured=worst,
        tolerance=1e-9,
        detail=f"{len(registry)} solved instances; singular floor {singular}",
    )


def _check_hamiltonian_battery(seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, 6])
    grid = TimeGrid(1.0, 4)
    t0 = time.perf_counter()
    worst = 0.0
    for idx in range(2000):
        m = 1 if idx < 1000 else 2
        cone = ConeKind.NONNEG_ORTHANT if idx % 2 == 0 else ConeKind.FULL_SPACE
        problem = _rand_jump_m(rng, grid, cone, m)
        p = rng.uniform(0.0, 3.0)
        q = rng.uniform(-2.0, 2.0, m)
        l1 = rng.uniform(0.0, 3.0)
        l2 = rng.uniform(0.0, 3.0)
        t = rng.uniform(0.0, 1.0)
        theta = rng.uniform(0.0, t) if t > 0.0 else 0.0
        for side in ("plus", "minus"):
            res = minimize_h_pre(side, t, p, q, l1, l2, problem)
            cs = coefficient_at(problem, t, "pre")
            hin = HamiltonianInput(side, "pre", p, q, l1, l2, cs, problem.cone)
            bounds = max(4.0, 2.5 * float(np.max(np.abs(res.argmin))) + 1.0)
            oracle = grid_oracle_min(side, "pre", hin, bounds, 33)
            worst = max(worst, abs(res.value - oracle.value))

            res = minimize_h_post(side, theta, t, p, q, problem)
            cs = coefficient_at(problem, t, "post", theta)
            hin = HamiltonianInput(side, "post", p, q, 0.0, 0.0, cs, problem.cone)
            bounds = max(4.0, 2.5 * float(np.max(np.abs(res.argmin))) + 1.0)
            oracle = grid_oracle_min(side, "post", hin, bounds, 33)
            worst = max(worst, abs(res.value - oracle.value))
    elapsed = time.perf_counter() - t0
    return CheckResult(
        name="06-hamiltonian-oracle",
        passed=worst <= 1e-6 and elapsed < 60.0,
        measured=worst,
        tolerance=1e-6,
        detail=f"1000 inputs per Hamiltonian for each of m=1, m=2, {elapsed:.1f}s (budget 60s)",
    )


def _rand_jump_m(
    rng: np.random.Generator, grid: TimeGrid, cone: ConeKind, m: int
) -> LQProblem:
    k = m
    L = rng.uniform(-0.7, 0.7, (m, m))
    r0 = L @ L.T + np.eye(m) * rng.uniform(0.1, 1.0)
    L = rng.uniform(-0.7, 0.7, (m, m))
    r1 = L @ L.T + np.eye(m) * rng.uniform(0.1, 1.0)
    pre = PreDefaultCoeffs.build(
        grid, m, k,
        a=rng.uniform(-1.0, 1.0),
        b=rng.uniform(-1.0, 1.0, m),
        c=rng.uniform(-0.5, 0.5, k),
        d=rng.uniform(-1.0, 1.0, (k, m)),
        e=rng.uniform(-0.8, 0.5),
        f=rng.uniform(-0.8, 0.8, m),
        q=rng.uniform(0.0, 1.0),
        r=r0,
        lam=rng.uniform(0.1, 1.0),
    )
    post = PostDefaultCoeffs.constants(
        grid, m, k,
        a=rng.uniform(-1.0, 1.0),
        b=rng.uniform(-1.0, 1.0, m),
        c=rng.uniform(-0.5, 0.5, k),
        d=rng.uniform(-1.0, 1.0, (k, m)),
        q=rng.uniform(0.0, 1.0),
        r=r1,
    )
    term = TerminalWeights.build(grid, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.5))
    return LQProblem(grid, ConeSpec(cone, m), k, pre, post, term)


def _check_value_mc(paths: int, seed: int, registry: list) -> CheckResult:
    problem = jump_mc_instance(1000)  # dt = 1e-3
    t0 = time.perf_counter()
    sol = assemble(problem)
    registry.append(("mc-jump", problem, sol))
    policy = extract_policy(problem, sol)
    worst = 0.0
    lines = []
    for x0 in (1.0, -1.0):
        value = value_at(sol, 0.0, x0)
        est = mc_cost(problem, policy, x0, paths, seed)
        z = (est.mean - value) / est.se
        worst = max(worst, abs(z))
        lines.append(f"x0={x0:+.0f}: z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    return CheckResult(
        name="07-value-vs-mc",
        passed=worst <= 3.0 and elapsed < 120.0,
        measured=worst,
        tolerance=3.0,
        detail=f"{'; '.join(lines)}; {paths} paths, {elapsed:.1f}s (budget 120s)",
    )


def _check_dominance(seed: int) -> CheckResult:
    problem = jump_mc_instance(200)
    sol = assemble(problem)
    policy = extract_policy(problem, sol)
    x0 = 1.0
    value = value_at(sol, 0.0, x0)

    worst = -np.inf
    for s in np.linspace(0.25, 2.0, 20):
        est = mc_cost(problem, scale_policy(policy, float(s)), x0, 20_000, seed)
        worst = max(worst, (value - est.mean) / est.se)

    mults, best = policy_grid_oracle(problem, x0, np.linspace(0.0, 2.0, 11), 512, seed)
    z_oracle = (value - best.mean) / best.se
    worst = max(worst, z_oracle)
    return CheckResult(
        name="08-optimality-dominance",
        passed=worst <= 3.0,
        measured=float(worst),
        tolerance=3.0,
        detail=(
            f"20 scaled policies and 11^4 grid policies; best grid multipliers "
            f"{np.round(mults, 2).tolist()} at z={z_oracle:+.2f}"
        ),
    )


def _check_frontier(paths: int, seed: int, registry: list) -> CheckResult:
    market = frontier_market(200)
    problem, sol = mv.embedded_solution(market)
    registry.append(("frontier-market", problem, sol))
    pair = (sol.P0, sol.N0)
    kappa = float(sol.N0[0]) * np.exp(-2.0 * mv.rate_integral(market))
    if not kappa < 1.0:
        return CheckResult("09-mv-frontier", False, kappa, 1.0, "kappa >= 1")

    policy = extract_policy(problem, sol)
    xear = market.x0 * np.exp(mv.rate_integral(market))
    worst = 0.0
    eta_err = 0.0
    exact_ok = True
    for ratio in (1.0, 1.1, 1.3):
        z = xear * ratio
        point = mv.frontier(market, [z])[0]
        eta_gs = golden_section_max(
            lambda e: mv.dual_value(market, e, z, pair=pair), xear, xear + 1.0
        )
        eta_err = max(eta_err, abs(point.eta_star - eta_gs))
        if ratio == 1.0:
            # all-cash point: every figure must come out exact, including a
            # simulated portfolio that never leaves zero
            moments = mc_terminal_moments(problem, policy, point.y0, 100, seed)
            exact_ok = (
                point.eta_star == xear
                and point.J_star == 0.0
                and point.y0 == 0.0
                and moments.mean.mean + point.eta_star == z
                and moments.variance.mean == 0.0
            )
            continue
        moments = mc_terminal_moments(problem, policy, point.y0, paths, seed)
        z_mean = (moments.mean.mean + point.eta_star - z) / moments.mean.se
        z_var = (moments.variance.mean - point.J_star) / moments.variance.se
        worst = max(worst, abs(z_mean), abs(z_var))
    return CheckResult(
        name="09-mv-frontier",
        passed=worst <= 3.0 and eta_err <= 1e-6 and exact_ok,
        measured=worst,
        tolerance=3.0,
        detail=(
            f"kappa={kappa:.6f}; |eta closed-form - golden-section| "
            f"max {eta_err:.2e}; zero-risk point exact: {exact_ok}"
        ),
    )


def _check_degenerate(registry: list) -> CheckResult:
    market = degenerate_market(200)
    feas = mv.feasibility_check(market)
    problem, sol = mv.embedded_solution(market)
    registry.append(("degenerate-market", problem, sol))
    kappa = float(sol.N0[0]) * np.exp(-2.0 * mv.rate_integral(market))
    err = abs(kappa - 1.0)
    refused = False
    try:
        mv.optimal_eta(market, market.x0 * np.exp(mv.rate_integral(market)) * 1.1,
                       pair=(sol.P0, sol.N0))
    except ConelqError as exc:
        refused = type(exc).__name__ == "DegenerateDual"
    return CheckResult(
        name="10-degenerate-market",
        passed=(not feas.feasible) and err <= 1e-8 and refused,
        measured=err,
        tolerance=1e-8,
        detail=(
            f"feasible={feas.feasible}, mass={feas.mass:.3e}, "
            f"dual refusal={'yes' if refused else 'no'}"
        ),
    )


def _check_config_problem(problem: LQProblem) -> CheckResult:
    try:
        sol = assemble(problem)
        return CheckResult(
            name="00-config-problem",
            passed=True,
            measured=0.0,
            tolerance=0.0,
            detail=f"case={sol.case.value}",
        )
    except ConelqError as exc:
        return CheckResult(
            name="00-config-problem",
            passed=False,
            measured=float("nan"),
            tolerance=0.0,
            detail=f"{type(exc).__name__}: {exc}",
        )


# ---------------------------------------------------------------------------
# runner

_DEFAULTS = {"grid": 1000, "paths": 100_000, "seed": 42}


def run_suite(config: Optional[dict] = None) -> VerificationReport:
    """Run the acceptance battery and assemble the report.

    config keys: grid (nodes for the deterministic checks), paths, seed,
    and optionally problem (an LQProblem from the caller's config file,
    validated as its own leading check so malformed inputs surface as a
    failed report entry instead of a crash).
    """
    cfg = dict(_DEFAULTS)
    problem: Optional[LQProblem] = None
    if config:
        for key, value in config.items():
            if key == "problem":
                problem = value
            elif key in cfg:
                cfg[key] = int(value)
            else:
                raise SchemaError(f"unknown verify option {key!r}")
    n, paths, seed = cfg["grid"], cfg["paths"], cfg["seed"]
    if paths < 2:
        raise SchemaError(f"need at least 2 paths, got {paths}")

    checks: list[CheckResult] = []
    registry: list = []
    if problem is not None:
        checks.append(_check_config_problem(problem))
    checks.append(_check_nojump_classical(n, seed, registry))
    checks.append(_check_separable_exact(n, registry))
    sym, mono = _check_symmetry_and_monotonicity(min(n, 400), seed, registry)
    checks.append(sym)
    checks.append(mono)
    checks.append(_check_hamiltonian_battery(seed))
    checks.append(_check_value_mc(paths, seed, registry))
    checks.append(_check_dominance(seed))
    checks.append(_check_frontier(paths, seed, registry))
    checks.append(_check_degenerate(registry))
    bounds = _check_theorem_bounds(registry)
    checks.insert(4 + (problem is not None), bounds)
    return _report(checks)
