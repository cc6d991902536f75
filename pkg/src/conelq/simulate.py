"""Monte Carlo engine for the controlled jump-diffusion.

Default times come from the intensity via the first-passage construction
(cumulative trapezoid integral against an Exp(1) draw); paths are Euler
with the grid step, with the jump applied at the first node at or after
the interpolated default time using the left-limit state.  Per-path
randomness is keyed deterministically by (seed, path index), so estimates
are reproducible regardless of batching or thread count, and identical
seeds give common random numbers across policy comparisons.

Stream protocol per path: one Exp(1) draw first, then the n standard
normals.  Problems with scalar control/noise and separable post-default
coefficients run on the compiled block kernel; everything else goes
through the per-path reference loop below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import NonFinite, SchemaError
from .model import LQProblem, TimeGrid, coefficient_at
from .riccati import FeedbackPolicy, _post_base_slope, uses_kernel

# An Exp(1) draw of exactly 0.0 (possible at ~2^-53) would place the default
# before the first node and index off the front of the grid; the kernels
# require strictly positive draws, so clamp to the smallest subnormal.
_THETA_FLOOR = 5e-324


@dataclass(frozen=True)
class PathRecord:
    """One realized trajectory.

    tau is None when the path survives to the horizon.  state_before_jump
    is the left limit at jump_node, and jump_e / jump_f are the pre-default
    loading coefficients interpolated at tau exactly as the engine applied
    them, so X[jump_node] == xl + jump_e*xl + jump_f @ u[jump_node - 1]
    holds bitwise."""

    tau: Optional[float]
    times: np.ndarray
    X: np.ndarray
    u: np.ndarray
    cost: float
    jump_node: Optional[int]
    state_before_jump: Optional[float]
    jump_e: Optional[float] = None
    jump_f: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    paths: int
    seed: int


@dataclass(frozen=True)
class TerminalMoments:
    """Sample mean and variance of the terminal state, each with its
    standard error (the variance SE uses the moment-based asymptotic
    formula, no normality assumption)."""

    mean: MCEstimate
    variance: MCEstimate


# ------------------------------------------------------------ default times


def cumulative_intensity(lam: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Trapezoid cumulative integral of the intensity over the grid nodes."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (grid.n + 1,):
        raise SchemaError(
            f"intensity: expected shape ({grid.n + 1},), got {lam.shape}"
        )
    if np.min(lam) < 0.0:
        raise SchemaError(f"intensity must be nonnegative, min = {np.min(lam):g}")
    out = np.empty(grid.n + 1)
    out[0] = 0.0
    np.cumsum(0.5 * (lam[1:] + lam[:-1]) * grid.step, out=out[1:])
    return out


def _locate_default(clam: np.ndarray, h: float, n: int, theta: float):
    """First node index whose accumulated intensity reaches theta, plus the
    linear-interpolation fraction within the crossing step and the default
    time itself; (n + 1, 0.0, None) when the path survives."""
    j = int(np.searchsorted(clam, theta, side="left"))
    if j > n:
        return n + 1, 0.0, None
    inc = clam[j] - clam[j - 1]
    frac = (theta - clam[j - 1]) / inc if inc > 0.0 else 0.0
    tau = (j - 1 + frac) * h
    return j, frac, tau


def sample_default(
    lam: np.ndarray, grid: TimeGrid, rng: np.random.Generator
) -> Optional[float]:
    """Draw Theta ~ Exp(1) and return the first time the accumulated
    intensity exceeds it, or None if the path survives the horizon."""
    clam = cumulative_intensity(lam, grid)
    theta = max(float(rng.standard_exponential()), _THETA_FLOOR)
    return _locate_default(clam, grid.step, grid.n, theta)[2]


# ------------------------------------------------------------ kernel tables


def _check_policy(problem: LQProblem, policy: FeedbackPolicy) -> None:
    n, m = problem.n, problem.m
    if policy.grid.n != n or policy.grid.horizon != problem.grid.horizon:
        raise SchemaError(
            f"policy grid (n={policy.grid.n}, T={policy.grid.horizon:g}) does "
            f"not match problem grid (n={n}, T={problem.grid.horizon:g})"
        )
    for name, arr, shape in (
        ("xi0_plus", policy.xi0_plus, (n + 1, m)),
        ("xi0_minus", policy.xi0_minus, (n + 1, m)),
        ("xi1_plus", policy.xi1_plus, (n + 1, n + 1, m)),
        ("xi1_minus", policy.xi1_minus, (n + 1, n + 1, m)),
    ):
        if arr.shape != shape:
            raise SchemaError(f"policy.{name}: expected shape {shape}, got {arr.shape}")


def _kernel_tables(problem: LQProblem, policy: FeedbackPolicy) -> tuple:
    """Flatten an m = k = 1 problem and its policy into the block engine's
    argument list.  The engine decomposes the state as (max(X,0), min(X,0)),
    so the minus-side gains flip sign relative to the x^- convention."""
    pre = problem.pre
    cc = np.ascontiguousarray
    tabs = [
        cc(pre.a),
        cc(pre.b[:, 0]),
        cc(pre.c[:, 0]),
        cc(pre.d[:, 0, 0]),
        cc(pre.e),
        cc(pre.f[:, 0]),
        cc(pre.q),
        cc(pre.r[:, 0, 0]),
        cc(pre.lam),
        cc(policy.xi0_plus[:, 0]),
        cc(-policy.xi0_minus[:, 0]),
    ]
    for base, slope in _post_base_slope(problem):
        tabs.append(cc(base))
        tabs.append(cc(slope))
    tabs.append(cc(policy.xi1_plus[:, :, 0]))
    tabs.append(cc(-policy.xi1_minus[:, :, 0]))
    tabs.append(float(problem.terminal.g0))
    tabs.append(cc(problem.terminal.g1))
    tabs.append(cumulative_intensity(pre.lam, problem.grid))
    return tuple(tabs)


# ----------------------------------------------------------- path reference


def _sim_general(problem, policy, x0, theta, Z):
    """Per-path Euler loop for vector controls or non-separable post
    coefficients; mirrors the block kernel's conventions."""
    grid = problem.grid
    n, h, m = grid.n, grid.step, problem.m
    nodes = grid.nodes
    sqh = math.sqrt(h)
    pre = problem.pre
    clam = cumulative_intensity(pre.lam, grid)
    jnode, frac, tau = _locate_default(clam, h, n, theta)
    has_def = jnode <= n

    etau = ftau = None
    if has_def:
        jm1, jcap = jnode - 1, jnode
        etau = float(pre.e[jm1] + frac * (pre.e[jcap] - pre.e[jm1]))
        ftau = pre.f[jm1] + frac * (pre.f[jcap] - pre.f[jm1])
        y = jm1 + frac
        jlo = min(int(y), n)
        v = y - jlo
        jlo2 = jlo + 1 if v > 0.0 else jlo
        g1 = problem.terminal.g1
        G = g1[jlo] + v * (g1[jlo2] - g1[jlo])
    else:
        G = float(problem.terminal.g0)

    X = float(x0)
    run = 0.0
    Xrec = np.empty(n + 1)
    Urec = np.zeros((n + 1, m))
    Xrec[0] = X
    xleft = None

    for i in range(n):
        xp = X if X > 0.0 else 0.0
        xm = -X if X < 0.0 else 0.0  # x^-: nonnegative magnitude of the loss side
        if i < jnode:
            u = policy.xi0_plus[i] * xp + policy.xi0_minus[i] * xm
            drift = (pre.a[i] - pre.lam[i] * pre.e[i]) * X + float(
                (pre.b[i] - pre.lam[i] * pre.f[i]) @ u
            )
            diff = pre.c[i] * X + pre.d[i] @ u
            run += (pre.q[i] * X * X + float(u @ pre.r[i] @ u)) * h
        else:
            t = float(nodes[i])
            cs = coefficient_at(problem, t, "post", theta=min(tau, t))
            rowp = policy.xi1_plus[i]
            rowm = policy.xi1_minus[i]
            gp = rowp[jlo] + v * (rowp[jlo2] - rowp[jlo])
            gm = rowm[jlo] + v * (rowm[jlo2] - rowm[jlo])
            u = gp * xp + gm * xm
            drift = cs.a * X + float(cs.b @ u)
            diff = cs.c * X + cs.d @ u
            run += (cs.q * X * X + float(u @ cs.r @ u)) * h
        Xn = X + drift * h + float(diff @ Z[i]) * sqh
        if jnode == i + 1:
            xleft = Xn
            Xn = Xn + etau * Xn + float(ftau @ u)
        if not math.isfinite(Xn):
            raise NonFinite(
                f"path engine: non-finite state at step {i + 1} (t={(i + 1) * h:g})"
            )
        X = Xn
        Xrec[i + 1] = X
        Urec[i] = u

    cost = 0.5 * (run + G * X * X)
    return cost, X, tau, jnode, xleft, etau, ftau, Xrec, Urec


# -------------------------------------------------------------- operations


def simulate_path(
    problem: LQProblem,
    policy: FeedbackPolicy,
    x0: float,
    rng: np.random.Generator,
) -> PathRecord:
    """Integrate one closed-loop path under the feedback policy."""
    _check_policy(problem, policy)
    grid = problem.grid
    n = grid.n
    theta = max(float(rng.standard_exponential()), _THETA_FLOOR)

    if uses_kernel(problem):
        Z = rng.standard_normal(n)
        tabs = _kernel_tables(problem, policy)
        cost, _, tau_arr, xleft_arr, Xrec, Urec = K.sim_blocks(
            float(x0), n, grid.step, *tabs,
            Z[None, :], np.array([theta]), True,
        )
        clam = tabs[-1]
        # replay the engine's interpolation so jump_e / jump_f are bitwise
        # the coefficients it applied
        jnode, frac, tau_h = _locate_default(clam, grid.step, n, theta)
        has_def = jnode <= n
        tau = float(tau_arr[0]) if has_def else None
        xleft = float(xleft_arr[0]) if has_def else None
        if has_def:
            e0, f0 = problem.pre.e, problem.pre.f
            je = float(e0[jnode - 1] + frac * (e0[jnode] - e0[jnode - 1]))
            jf = f0[jnode - 1] + frac * (f0[jnode] - f0[jnode - 1])
        else:
            je = jf = None
        X = Xrec[0]
        u = Urec[0][:, None]
        cost = float(cost[0])
    else:
        Z = rng.standard_normal((n, problem.k))
        cost, _, tau, jnode, xleft, je, jf, X, u = _sim_general(
            problem, policy, float(x0), theta, Z
        )
        has_def = jnode <= n

    return PathRecord(
        tau=tau,
        times=grid.nodes,
        X=X,
        u=u,
        cost=float(cost),
        jump_node=jnode if has_def else None,
        state_before_jump=xleft,
        jump_e=je,
        jump_f=jf,
    )


def _path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, index]))


def _draw_block(seed: int, start: int, count: int, n: int):
    Th = np.empty(count)
    Z = np.empty((count, n))
    for j in range(count):
        g = _path_rng(seed, start + j)
        Th[j] = g.standard_exponential()
        Z[j] = g.standard_normal(n)
    return np.maximum(Th, _THETA_FLOOR), Z


def _run_paths(problem, policy, x0, paths, seed, block=4096):
    """Realized cost and terminal state for every path index in [0, paths)."""
    _check_policy(problem, policy)
    if paths < 2:
        raise SchemaError(f"paths must be at least 2, got {paths}")
    if not 0 <= seed < 2**63:
        raise SchemaError(f"seed must be a nonnegative 63-bit integer, got {seed}")
    n, h = problem.n, problem.grid.step
    costs = np.empty(paths)
    xTs = np.empty(paths)

    if uses_kernel(problem):
        tabs = _kernel_tables(problem, policy)
        done = 0
        while done < paths:
            bs = min(block, paths - done)
            Th, Z = _draw_block(seed, done, bs, n)
            c, xT, _, _, _, _ = K.sim_blocks(float(x0), n, h, *tabs, Z, Th, False)
            costs[done : done + bs] = c
            xTs[done : done + bs] = xT
            done += bs
    else:
        k = problem.k
        for j in range(paths):
            g = _path_rng(seed, j)
            theta = max(float(g.standard_exponential()), _THETA_FLOOR)
            Z = g.standard_normal((n, k))
            c, xT, *_ = _sim_general(problem, policy, float(x0), theta, Z)
            costs[j] = c
            xTs[j] = xT
    return costs, xTs


def mc_cost(
    problem: LQProblem,
    policy: FeedbackPolicy,
    x0: float,
    paths: int,
    seed: int,
) -> MCEstimate:
    """Mean realized cost with its standard error over deterministic
    per-path streams."""
    costs, _ = _run_paths(problem, policy, x0, paths, seed)
    mean = float(np.mean(costs))
    se = float(np.std(costs, ddof=1) / math.sqrt(paths))
    return MCEstimate(mean=mean, se=se, paths=paths, seed=seed)


def mc_terminal_moments(
    problem: LQProblem,
    policy: FeedbackPolicy,
    x0: float,
    paths: int,
    seed: int,
) -> TerminalMoments:
    """Sample mean and variance of X_T with standard errors, same stream
    layout as mc_cost so comparisons share draws."""
    _, xT = _run_paths(problem, policy, x0, paths, seed)
    mean = float(np.mean(xT))
    mean_se = float(np.std(xT, ddof=1) / math.sqrt(paths))
    d = xT - mean
    s2 = float(d @ d) / (paths - 1)
    m4 = float(np.mean(d**4))
    var_se = math.sqrt(max(m4 - s2 * s2 * (paths - 3) / (paths - 1), 0.0) / paths)
    return TerminalMoments(
        mean=MCEstimate(mean=mean, se=mean_se, paths=paths, seed=seed),
        variance=MCEstimate(mean=s2, se=var_se, paths=paths, seed=seed),
    )
