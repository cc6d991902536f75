"""Backward solution of the constrained Riccati cascade and policy extraction.

The value function is piecewise quadratic in the positive/negative parts of
the state, with one curve pair per default phase. Solving order:

  1. post-default pair (P1, N1) on the triangle theta <= t, one slice per
     default time theta (all slices advance together);
  2. the diagonal curves t -> P1(t, t), N1(t, t);
  3. the coupled pre-default pair (P0, N0), whose drivers consume the
     diagonals through the jump terms.

Scalar-control, scalar-noise problems with separable (constant or affine in
theta) post-default coefficients run on the compiled/vectorized kernels;
everything else goes through the general integrators here, which call the
hamiltonian minimizers stage by stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .errors import (
    BlowUp,
    ConvexityViolated,
    InvariantViolation,
    NonFinite,
    OutOfRange,
    SchemaError,
)
from .hamiltonian import minimize_h_post, minimize_h_pre
from ._kernels.hmin import quadmin_vector
from .model import (
    CaseClass,
    ConeSpec,
    LQProblem,
    ThetaMode,
    TimeGrid,
    coefficient_at,
    validate_problem,
)

NEG_TOL = -1e-9  # rounding slack below which nonnegative curves are violated
_INV_TOL = 1e-9  # slack for the assembled-solution bound checks


class PostDefaultSlice(NamedTuple):
    """One theta-slice of the post-default pair on [theta, T]."""

    times: np.ndarray
    P: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class RiccatiSolution:
    """Assembled curves of the decomposed backward system.

    P1/N1 are (n+1, n+1) lower triangles, rows indexed by the time node and
    columns by the default-time node; entries above the diagonal are NaN.
    Zbar/Lambdabar are the default-jump integrands diag - pre of the pasted
    value process (the Brownian integrands vanish for deterministic
    coefficients and are not stored)."""

    grid: TimeGrid
    case: CaseClass
    P0: np.ndarray
    N0: np.ndarray
    P1: np.ndarray
    N1: np.ndarray
    diagP: np.ndarray
    diagN: np.ndarray
    Zbar: np.ndarray
    Lambdabar: np.ndarray
    positivity_floor: float


@dataclass(frozen=True)
class FeedbackPolicy:
    """Cone-valued feedback gains: u(t) = xi_plus(t) x^+ + xi_minus(t) x^-.

    Pre-default gains are (n+1, m); post-default gains are (n+1, n+1, m)
    triangles over (time node, default node), NaN above the diagonal."""

    grid: TimeGrid
    cone: ConeSpec
    xi0_plus: np.ndarray
    xi0_minus: np.ndarray
    xi1_plus: np.ndarray
    xi1_minus: np.ndarray


# ------------------------------------------------------------------ plumbing


def blowup_ceiling(problem: LQProblem) -> float:
    # bounded-solution theorems make any excursion this large a user error
    g_sup = max(problem.terminal.g0, float(np.max(problem.terminal.g1)), 0.0)
    return 1e8 * (1.0 + g_sup)


def uses_kernel(problem: LQProblem) -> bool:
    """Scalar control and noise with separable theta-dependence runs on the
    backend kernels; anything else takes the general python integrators."""
    return problem.m == 1 and problem.k == 1 and problem.post.is_separable


def _guard(p: float) -> float:
    if p >= 0.0:
        return p
    if p > NEG_TOL:
        return 0.0
    return p


def _clamp_diag(d: float, name: str, t: float) -> float:
    if d < 0.0:
        if d < NEG_TOL:
            raise ConvexityViolated(
                f"jump certificate failed: {name} = {d:g} < 0 at t={t:g}"
            )
        return 0.0
    return d


def _pre_node_scalars(problem: LQProblem) -> dict:
    pre = problem.pre
    return {
        "a": pre.a,
        "b": pre.b[:, 0],
        "c": pre.c[:, 0],
        "d": pre.d[:, 0, 0],
        "e": pre.e,
        "f": pre.f[:, 0],
        "q": pre.q,
        "r": pre.r[:, 0, 0],
        "lam": pre.lam,
    }


def _post_base_slope(problem: LQProblem):
    """Node-level (base, slope) pairs of the six separable post coefficients,
    flattened to scalars; slopes are zero for constant dependence."""
    n = problem.n
    out = []
    for dep, pick in (
        (problem.post.a, lambda x: x),
        (problem.post.b, lambda x: x[..., 0]),
        (problem.post.c, lambda x: x[..., 0]),
        (problem.post.d, lambda x: x[..., 0, 0]),
        (problem.post.q, lambda x: x),
        (problem.post.r, lambda x: x[..., 0, 0]),
    ):
        base = pick(dep.base)
        if dep.mode is ThetaMode.AFFINE:
            slope = pick(dep.slope)
        else:
            slope = np.zeros(n + 1)
        out.append((np.asarray(base, dtype=float), np.asarray(slope, dtype=float)))
    return out


def _const_mode(problem: LQProblem, pairs) -> bool:
    # all theta-slices coincide when nothing depends on theta; time variation
    # is fine, every slice sees the same profile
    g1 = problem.terminal.g1
    if not np.all(g1 == g1[0]):
        return False
    return all(not np.any(slope != 0.0) for _, slope in pairs)


# --------------------------------------------------------- post-default pass


def _kernel_triangle(problem: LQProblem, ceiling: float):
    n, h = problem.n, problem.grid.step
    pairs = _post_base_slope(problem)
    halves = []
    for base, slope in pairs:
        halves.append(K.half_linear(base))
        halves.append(K.half_linear(slope))
    return K.triangle_separable(
        n,
        h,
        problem.cone.is_orthant,
        _const_mode(problem, pairs),
        *halves,
        problem.terminal.g1,
        ceiling,
    )


def _check_scalar_step(p: float, nn: float, ceiling: float, node: int, h: float,
                       what: str) -> None:
    if not (abs(p) <= ceiling and abs(nn) <= ceiling):
        if not (np.isfinite(p) and np.isfinite(nn)):
            raise NonFinite(f"{what}: non-finite value at node {node} (t={node * h:g})")
        raise BlowUp(
            f"{what}: |value| exceeded ceiling {ceiling:g} at node {node} "
            f"(t={node * h:g}); invalid problem or too-coarse grid"
        )


def solve_post_default(problem: LQProblem, theta: float) -> PostDefaultSlice:
    """Integrate one post-default slice backward from T to theta.

    General-purpose (any m, k, theta-dependence); the assembled solve uses
    the vectorized triangle instead when the kernels apply. For off-grid
    theta the first returned point sits at theta itself (shortened step)."""
    grid = problem.grid
    T, h, n = grid.horizon, grid.step, grid.n
    if not (0.0 <= theta <= T):
        raise OutOfRange(f"theta = {theta:g} outside [0, {T:g}]")
    ceiling = blowup_ceiling(problem)
    zq = np.zeros(problem.k)
    nodes = grid.nodes

    def f(t: float, p: float, nn: float):
        # stage times can stray a rounding error outside [theta, T]
        t = min(max(t, theta), T)
        pe = _guard(p)
        ne = _guard(nn)
        cs = coefficient_at(problem, t, "post", theta)
        mp = minimize_h_post("plus", theta, t, pe, zq, problem).value
        mn = minimize_h_post("minus", theta, t, ne, zq, problem).value
        return 2.0 * cs.a * pe + cs.q + mp, 2.0 * cs.a * ne + cs.q + mn

    pos = theta / h
    j_near = int(round(pos))
    on_grid = abs(pos - j_near) < 1e-9
    j0 = j_near if on_grid else int(np.ceil(pos))

    g1t = problem.terminal.g1_at(grid, theta)
    p = nn = float(g1t)
    Ps = [p]
    Ns = [nn]
    for i in range(n, j0, -1):
        p, nn = _rk4_step(f, float(nodes[i]), h, p, nn)
        _check_scalar_step(p, nn, ceiling, i - 1, h, "post-default slice")
        Ps.append(p)
        Ns.append(nn)
    times = nodes[j0:]
    if not on_grid:
        t1 = float(nodes[j0])
        p, nn = _rk4_step(f, t1, t1 - theta, p, nn)
        _check_scalar_step(p, nn, ceiling, j0, h, "post-default slice")
        Ps.append(p)
        Ns.append(nn)
        times = np.concatenate([[theta], times])
    return PostDefaultSlice(times, np.array(Ps[::-1]), np.array(Ns[::-1]))


def _rk4_step(f, t1: float, h: float, p: float, nn: float):
    """One backward step of the 4-stage scheme from t1 to t1 - h."""
    h2 = 0.5 * h
    h6 = h / 6.0
    kp1, kn1 = f(t1, p, nn)
    kp2, kn2 = f(t1 - h2, p + h2 * kp1, nn + h2 * kn1)
    kp3, kn3 = f(t1 - h2, p + h2 * kp2, nn + h2 * kn2)
    kp4, kn4 = f(t1 - h, p + h * kp3, nn + h * kn3)
    return (
        p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4),
        nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4),
    )


def _triangle(problem: LQProblem, ceiling: float):
    n = problem.n
    if uses_kernel(problem):
        return _kernel_triangle(problem, ceiling)
    P1 = np.full((n + 1, n + 1), np.nan)
    N1 = np.full((n + 1, n + 1), np.nan)
    nodes = problem.grid.nodes
    for j in range(n + 1):
        sl = solve_post_default(problem, float(nodes[j]))
        P1[j:, j] = sl.P
        N1[j:, j] = sl.N
    return P1, N1


def solve_diagonals(problem: LQProblem):
    """diagP(t_i) = P1(t_i, t_i) and the N analogue, for every node."""
    P1, N1 = _triangle(problem, blowup_ceiling(problem))
    return np.ascontiguousarray(np.diag(P1)), np.ascontiguousarray(np.diag(N1))


# ---------------------------------------------------------- pre-default pass


def solve_pre_default(problem: LQProblem, diagP: np.ndarray, diagN: np.ndarray):
    """Integrate the coupled pre-default pair backward on the nodes.

    The diagonals enter the drivers at stage times through smooth (cubic)
    midpoints; coefficient midpoints are neighbor means, exact for the
    piecewise-linear convention."""
    grid = problem.grid
    n, h = grid.n, grid.step
    diagP = np.asarray(diagP, dtype=float)
    diagN = np.asarray(diagN, dtype=float)
    if diagP.shape != (n + 1,) or diagN.shape != (n + 1,):
        raise SchemaError("diagonal arrays must match the grid")
    ceiling = blowup_ceiling(problem)
    g0 = problem.terminal.g0

    if uses_kernel(problem):
        sc = _pre_node_scalars(problem)
        return K.pre_pair(
            n,
            h,
            problem.cone.is_orthant,
            K.half_linear(sc["a"]),
            K.half_linear(sc["b"]),
            K.half_linear(sc["c"]),
            K.half_linear(sc["d"]),
            K.half_linear(sc["e"]),
            K.half_linear(sc["f"]),
            K.half_linear(sc["q"]),
            K.half_linear(sc["r"]),
            K.half_linear(sc["lam"]),
            K.half_cubic(diagP),
            K.half_cubic(diagN),
            g0,
            ceiling,
        )

    dPh = K.half_cubic(diagP)
    dNh = K.half_cubic(diagN)
    lam_h = K.half_linear(problem.pre.lam)
    a_h = K.half_linear(problem.pre.a)
    e_h = K.half_linear(problem.pre.e)
    q_h = K.half_linear(problem.pre.q)
    t_h = K.half_linear(grid.nodes)  # stage times; endpoint lands exactly on T
    h2 = 0.5 * h
    zq = np.zeros(problem.k)

    def f(s: int, p: float, nn: float):
        t = float(t_h[s])
        dp = _clamp_diag(float(dPh[s]), "diagP", t)
        dn = _clamp_diag(float(dNh[s]), "diagN", t)
        pe = _guard(p)
        ne = _guard(nn)
        lm = float(lam_h[s])
        mp = minimize_h_pre("plus", t, pe, zq, dp - pe, dn, problem).value
        mn = minimize_h_pre("minus", t, ne, zq, dp, dn - ne, problem).value
        twoa = 2.0 * (float(a_h[s]) - lm * float(e_h[s]))
        qv = float(q_h[s])
        fp = twoa * pe + qv + mp + lm * (dp - pe)
        fn = twoa * ne + qv + mn + lm * (dn - ne)
        return fp, fn

    P0 = np.empty(n + 1)
    N0 = np.empty(n + 1)
    P0[n] = N0[n] = g0
    p = nn = float(g0)
    for i in range(n, 0, -1):
        s1, s2, s3 = 2 * i, 2 * i - 1, 2 * i - 2
        kp1, kn1 = f(s1, p, nn)
        kp2, kn2 = f(s2, p + h2 * kp1, nn + h2 * kn1)
        kp3, kn3 = f(s2, p + h2 * kp2, nn + h2 * kn2)
        kp4, kn4 = f(s3, p + h * kp3, nn + h * kn3)
        h6 = h / 6.0
        p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
        nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
        _check_scalar_step(p, nn, ceiling, i - 1, h, "pre-default pair")
        P0[i - 1] = p
        N0[i - 1] = nn
    return P0, N0


# ------------------------------------------------------------------ assembly


def _tri_mask(n: int) -> np.ndarray:
    idx = np.arange(n + 1)
    return idx[None, :] <= idx[:, None]


def _check_invariants(problem: LQProblem, case: CaseClass, P0, N0, P1, N1,
                      diagP, diagN, Zbar, Lambdabar) -> float:
    n = problem.n
    h = problem.grid.step
    g0 = problem.terminal.g0
    g1 = problem.terminal.g1
    tri = _tri_mask(n)

    if P0[n] != g0 or N0[n] != g0:
        raise InvariantViolation(
            f"terminal condition violated: P0(T) = {P0[n]:.17g}, "
            f"N0(T) = {N0[n]:.17g}, expected G0 = {g0:.17g}"
        )
    if not (np.array_equal(P1[n], g1) and np.array_equal(N1[n], g1)):
        raise InvariantViolation("terminal condition violated on the last triangle row")

    floor = np.inf
    worst = ("", -1, np.inf)
    for name, arr in (("P0", P0), ("N0", N0)):
        i = int(np.argmin(arr))
        if arr[i] < floor:
            floor = float(arr[i])
        if arr[i] < worst[2]:
            worst = (name, i, float(arr[i]))
    for name, arr in (("P1", P1), ("N1", N1)):
        vals = np.where(tri, arr, np.inf)
        flat = int(np.argmin(vals))
        i, j = divmod(flat, n + 1)
        v = float(vals[i, j])
        if v < floor:
            floor = v
        if v < worst[2]:
            worst = (f"{name}[{i},{j}]", i, v)

    if floor < NEG_TOL:
        name, i, v = worst
        raise InvariantViolation(
            f"nonnegativity violated: {name} = {v:g} at node {i} (t={i * h:g})"
        )
    if case is CaseClass.SINGULAR and floor <= 0.0:
        name, i, v = worst
        raise InvariantViolation(
            f"uniform positivity violated in the singular case: "
            f"{name} = {v:g} at node {i} (t={i * h:g})"
        )

    supP = max(float(np.max(P0)), float(np.max(np.where(tri, P1, -np.inf))))
    supN = max(float(np.max(N0)), float(np.max(np.where(tri, N1, -np.inf))))
    zmax = float(np.max(np.abs(Zbar)))
    lmax = float(np.max(np.abs(Lambdabar)))
    if zmax > 2.0 * supP + _INV_TOL:
        i = int(np.argmax(np.abs(Zbar)))
        raise InvariantViolation(
            f"jump integrand bound violated: |Zbar| = {zmax:g} > 2 sup P = "
            f"{2.0 * supP:g} at node {i} (t={i * h:g})"
        )
    if lmax > 2.0 * supN + _INV_TOL:
        i = int(np.argmax(np.abs(Lambdabar)))
        raise InvariantViolation(
            f"jump integrand bound violated: |Lambdabar| = {lmax:g} > 2 sup N = "
            f"{2.0 * supN:g} at node {i} (t={i * h:g})"
        )
    for name, arr in (("Zbar + P0", Zbar + P0), ("Lambdabar + N0", Lambdabar + N0)):
        i = int(np.argmin(arr))
        if arr[i] < NEG_TOL:
            raise InvariantViolation(
                f"shifted jump integrand negative: {name} = {arr[i]:g} "
                f"at node {i} (t={i * h:g})"
            )
    return floor


def assemble(problem: LQProblem) -> RiccatiSolution:
    """Validate, run the cascade, and return the checked solution.

    Every bound of the solution type is enforced here; a failed bound is an
    error naming the bound and the node, never a warning."""
    validation = validate_problem(problem)
    ceiling = blowup_ceiling(problem)
    P1, N1 = _triangle(problem, ceiling)
    diagP = np.ascontiguousarray(np.diag(P1))
    diagN = np.ascontiguousarray(np.diag(N1))
    P0, N0 = solve_pre_default(problem, diagP, diagN)
    Zbar = diagP - P0
    Lambdabar = diagN - N0
    floor = _check_invariants(
        problem, validation.case, P0, N0, P1, N1, diagP, diagN, Zbar, Lambdabar
    )
    return RiccatiSolution(
        grid=problem.grid,
        case=validation.case,
        P0=P0,
        N0=N0,
        P1=P1,
        N1=N1,
        diagP=diagP,
        diagN=diagN,
        Zbar=Zbar,
        Lambdabar=Lambdabar,
        positivity_floor=floor,
    )


# ------------------------------------------------------------------- policy


def _post_gains_separable(problem: LQProblem, solution: RiccatiSolution):
    """Vectorized post-default gains over the triangle (m = k = 1)."""
    n = problem.n
    thetas = problem.grid.nodes
    pairs = _post_base_slope(problem)
    (ab, asl), (bb, bsl), (cb, csl), (db, dsl), (qb, qsl), (rb, rsl) = pairs
    th = thetas[None, :]
    bgrid = bb[:, None] + bsl[:, None] * th
    cgrid = cb[:, None] + csl[:, None] * th
    dgrid = db[:, None] + dsl[:, None] * th
    rgrid = rb[:, None] + rsl[:, None] * th
    tri = _tri_mask(n)
    idx = np.where(tri)
    orthant = problem.cone.is_orthant

    xi1p = np.full((n + 1, n + 1, 1), np.nan)
    xi1m = np.full((n + 1, n + 1, 1), np.nan)
    for arr, curve, sgn in ((xi1p, solution.P1, 2.0), (xi1m, solution.N1, -2.0)):
        vals = curve[idx]
        pe = np.where(vals >= 0.0, vals, np.where(vals > NEG_TOL, 0.0, vals))
        dd = dgrid[idx] * dgrid[idx]
        bcd = bgrid[idx] + cgrid[idx] * dgrid[idx]
        alpha = rgrid[idx] + pe * dd
        beta = sgn * pe * bcd
        _, u = quadmin_vector(alpha, beta, orthant)
        arr[idx[0], idx[1], 0] = u
    return xi1p, xi1m


def extract_policy(problem: LQProblem, solution: RiccatiSolution) -> FeedbackPolicy:
    """Feedback gains at every node: pre-default from the jump-coupled
    Hamiltonians with the solved (l1, l2) wiring, post-default per triangle
    node from the plain quadratic Hamiltonians."""
    grid = problem.grid
    n, m = problem.n, problem.m
    nodes = grid.nodes
    zq = np.zeros(problem.k)
    P0, N0 = solution.P0, solution.N0
    diagP, diagN = solution.diagP, solution.diagN

    xi0p = np.empty((n + 1, m))
    xi0m = np.empty((n + 1, m))
    for i in range(n + 1):
        t = float(nodes[i])
        dp = _clamp_diag(float(diagP[i]), "diagP", t)
        dn = _clamp_diag(float(diagN[i]), "diagN", t)
        pe = _guard(float(P0[i]))
        ne = _guard(float(N0[i]))
        xi0p[i] = minimize_h_pre("plus", t, pe, zq, dp - pe, dn, problem).argmin
        xi0m[i] = minimize_h_pre("minus", t, ne, zq, dp, dn - ne, problem).argmin

    if uses_kernel(problem):
        xi1p, xi1m = _post_gains_separable(problem, solution)
    else:
        xi1p = np.full((n + 1, n + 1, m), np.nan)
        xi1m = np.full((n + 1, n + 1, m), np.nan)
        for i in range(n + 1):
            t = float(nodes[i])
            for j in range(i + 1):
                th = float(nodes[j])
                pe = _guard(float(solution.P1[i, j]))
                ne = _guard(float(solution.N1[i, j]))
                xi1p[i, j] = minimize_h_post("plus", th, t, pe, zq, problem).argmin
                xi1m[i, j] = minimize_h_post("minus", th, t, ne, zq, problem).argmin

    if problem.cone.is_orthant:
        tri = _tri_mask(n)
        worst = min(
            float(np.min(xi0p)),
            float(np.min(xi0m)),
            float(np.min(np.where(tri[..., None], xi1p, np.inf))),
            float(np.min(np.where(tri[..., None], xi1m, np.inf))),
        )
        if worst < 0.0:
            raise InvariantViolation(f"policy gain outside the cone: {worst:g}")
    return FeedbackPolicy(
        grid=grid,
        cone=problem.cone,
        xi0_plus=xi0p,
        xi0_minus=xi0m,
        xi1_plus=xi1p,
        xi1_minus=xi1m,
    )


# -------------------------------------------------------------------- value


def value_at(
    solution: RiccatiSolution,
    t: float,
    x: float,
    phase: str = "pre",
    theta: Optional[float] = None,
) -> float:
    """Quadratic value at (t, x): half P x^{+,2} + half N x^{-,2}, with the
    phase selecting the pre-default curves or the theta-slice."""
    grid = solution.grid
    T, h, n = grid.horizon, grid.step, grid.n
    if not (0.0 <= t <= T):
        raise OutOfRange(f"t = {t:g} outside [0, {T:g}]")
    if phase == "pre":
        P = _interp_node(solution.P0, t, h, n)
        N = _interp_node(solution.N0, t, h, n)
    elif phase == "post":
        if theta is None:
            raise SchemaError("post-default value needs the default time theta")
        if not (0.0 <= theta <= t):
            raise OutOfRange(f"theta = {theta:g} outside [0, t = {t:g}]")
        P = _interp_triangle(solution.P1, solution.diagP, t, theta, h, n)
        N = _interp_triangle(solution.N1, solution.diagN, t, theta, h, n)
    else:
        raise SchemaError(f"unknown phase {phase!r}")
    xp = x if x > 0.0 else 0.0
    xm = x if x < 0.0 else 0.0
    return 0.5 * P * xp * xp + 0.5 * N * xm * xm


def _interp_node(arr: np.ndarray, t: float, h: float, n: int) -> float:
    pos = t / h
    i = int(pos)
    if i >= n:
        return float(arr[n])
    fr = pos - i
    return float(arr[i] + fr * (arr[i + 1] - arr[i]))


def _interp_triangle(tri: np.ndarray, diag: np.ndarray, t: float, theta: float,
                     h: float, n: int) -> float:
    posth = theta / h
    jlo = min(int(posth), n)
    v = posth - jlo
    jhi = jlo + 1 if v > 0.0 else jlo

    def row_val(i: int) -> float:
        return float(tri[i, jlo] + v * (tri[i, jhi] - tri[i, jlo]))

    first = jhi  # first row where both interpolation columns exist
    tpos = t / h
    if tpos >= first:
        i = min(int(tpos), n - 1) if n > 0 else 0
        i = max(i, first)
        if i >= n:
            return row_val(n)
        fr = tpos - i
        return row_val(i) + fr * (row_val(i + 1) - row_val(i))
    # t inside the sliver between theta and the first full row: anchor the
    # left end on the diagonal value at theta
    left = float(diag[jlo] + v * (diag[min(jhi, n)] - diag[jlo]))
    right = row_val(first)
    denom = first * h - theta
    if denom <= 0.0:
        return right
    fr = (t - theta) / denom
    return left + fr * (right - left)
