"""Hamiltonians of the backward equations and their exact/approximate minima.

Positive homogeneity of the cone splits the value function into positive and
negative parts, one scalar weight each; the weights obey backward ODEs driven
by infima of piecewise-quadratic functions of the control:

  post-default, plus side:
      h(u) = 2 p B.u + p |C + D u|^2 + 2 (D u).q + u.R u
  post-default, minus side: flip the signs of B, C and q.

  pre-default, plus side, intensity lam:
      h0(u) = 2 p B.u - 2 p lam F.u + p |C + D u|^2 + 2 (D u).q + u.R u
              + (l1 + p) lam [((1 + E + F.u)^+)^2 - 1]
              + l2 lam ((1 + E + F.u)^-)^2
  pre-default, minus side:
      h0(u) = -2 p B.u + 2 p lam F.u + p |-C + D u|^2 - 2 (D u).q + u.R u
              + l1 lam ((-1 - E + F.u)^+)^2
              + (l2 + p) lam [((-1 - E + F.u)^-)^2 - 1]

l1 and l2 couple the pre-default equations to the post-default diagonal
curves. Minimization is exact for scalar control (piecewise-quadratic
enumeration) and by projected gradient for m >= 2; a lattice-plus-refinement
oracle provides solver-independent reference minima for m <= 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvexityViolated, NonCoercive, SchemaError
from .model import ConeSpec, CoefficientSlice, LQProblem, coefficient_at
from ._kernels.hmin import hmin_scalar, quadmin_scalar

SIDES = ("plus", "minus")
PHASES = ("pre", "post")


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise SchemaError(f"side must be one of {SIDES}, got {side!r}")
    return side


def f_jump(side: str, x, y, e):
    """Jump penalty of the value decomposition:

    plus:  1/2 (((1+e) x + y)^+)^2 - 1/2 (x^+)^2
    minus: 1/2 (((1+e) x + y)^-)^2 - 1/2 (x^-)^2
    """
    _check_side(side)
    x = np.asarray(x, dtype=float)
    z = (1.0 + e) * x + y
    if side == "plus":
        zp = np.maximum(z, 0.0)
        xp = np.maximum(x, 0.0)
        out = 0.5 * zp * zp - 0.5 * xp * xp
    else:
        zm = np.minimum(z, 0.0)
        xm = np.minimum(x, 0.0)
        out = 0.5 * zm * zm - 0.5 * xm * xm
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MinResult:
    """Outcome of one Hamiltonian minimization."""

    value: float
    argmin: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class HamiltonianInput:
    """Bundle of everything a Hamiltonian evaluation needs at one point."""

    side: str
    phase: str
    p: float
    q: np.ndarray
    l1: float
    l2: float
    coeffs: CoefficientSlice
    cone: ConeSpec

    def validate(self) -> None:
        if self.side not in SIDES:
            raise SchemaError(f"side must be one of {SIDES}")
        if self.phase not in PHASES:
            raise SchemaError(f"phase must be one of {PHASES}")
        if self.p < 0.0:
            raise ConvexityViolated(f"p = {self.p:g} < 0")
        if self.phase == "pre":
            if self.side == "plus":
                if self.l1 + self.p < 0.0 or self.l2 < 0.0:
                    raise ConvexityViolated(
                        f"plus-side certificates failed: l1+p = {self.l1 + self.p:g}, "
                        f"l2 = {self.l2:g}"
                    )
            else:
                if self.l1 < 0.0 or self.l2 + self.p < 0.0:
                    raise ConvexityViolated(
                        f"minus-side certificates failed: l1 = {self.l1:g}, "
                        f"l2+p = {self.l2 + self.p:g}"
                    )


def hamiltonian_objective(inp: HamiltonianInput):
    """The integrand h(u) as a plain callable (vectorized over trailing u).

    Written out term-by-term from the definitions above; deliberately not
    reusing the solver's reduced (alpha, beta) form so it can serve as an
    independent check.
    """
    cs = inp.coeffs
    p, q, l1, l2 = inp.p, np.asarray(inp.q, dtype=float), inp.l1, inp.l2
    sign = 1.0 if inp.side == "plus" else -1.0

    if inp.phase == "post":

        def g(u):
            u = np.asarray(u, dtype=float)
            du = u @ cs.d.T
            quad = np.einsum("...i,ij,...j->...", u, cs.r, u)
            diff = sign * cs.c + du
            return (
                2.0 * p * sign * (u @ cs.b)
                + p * np.einsum("...k,...k->...", diff, diff)
                + 2.0 * sign * (du @ q)
                + quad
            )

        return g

    lam, e = cs.lam, cs.e

    def g(u):
        u = np.asarray(u, dtype=float)
        du = u @ cs.d.T
        fu = u @ cs.f
        quad = np.einsum("...i,ij,...j->...", u, cs.r, u)
        diff = sign * cs.c + du
        base = (
            2.0 * p * sign * (u @ cs.b)
            - 2.0 * p * lam * sign * fu
            + p * np.einsum("...k,...k->...", diff, diff)
            + 2.0 * sign * (du @ q)
            + quad
        )
        w = sign * (1.0 + e) + fu
        wp = np.maximum(w, 0.0)
        wm = np.minimum(w, 0.0)
        if inp.side == "plus":
            return base + (l1 + p) * lam * (wp * wp - 1.0) + l2 * lam * (wm * wm)
        return base + l1 * lam * (wp * wp) + (l2 + p) * lam * (wm * wm - 1.0)

    return g


def _reduced_terms(side: str, phase: str, p: float, q, cs: CoefficientSlice):
    """Quadratic coefficient M, linear vector, and constant p|C|^2."""
    q = np.asarray(q, dtype=float)
    M = cs.r + p * (cs.d.T @ cs.d)
    if phase == "pre":
        lin = 2.0 * (p * (cs.b - cs.lam * cs.f) + p * (cs.d.T @ cs.c) + cs.d.T @ q)
    else:
        lin = 2.0 * (p * cs.b + p * (cs.d.T @ cs.c) + cs.d.T @ q)
    if side == "minus":
        lin = -lin
    return M, lin, p * float(cs.c @ cs.c)


def _fullspace_quadratic(M: np.ndarray, lin: np.ndarray):
    """Exact min of u.M u + lin.u over R^m; min-norm argmin on flat directions."""
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    gv = V.T @ (0.5 * lin)
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    tol = max(wmax, 1.0) * 1e-14 * len(w)
    if np.any(w < -tol):
        raise NonCoercive(f"quadratic form has negative eigenvalue {w.min():g}")
    flat = np.abs(w) <= tol
    if np.any(flat & (np.abs(gv) > tol * (1.0 + np.abs(gv).max()))):
        raise NonCoercive("linear term does not vanish on the flat directions")
    y = np.where(flat, 0.0, -gv / np.where(flat, 1.0, w))
    u = V @ y
    val = float(u @ M @ u + lin @ u)
    return val, u


def _pgd(M, lin, w0, fvec, a, b, cone: ConeSpec, tol=1e-10, max_iter=10_000):
    """Projected gradient with Barzilai-Borwein steps and Armijo backtracking.

    Minimizes u.M u + lin.u + a (w^+)^2 + b (w^-)^2, w = w0 + fvec.u over the
    cone. Returns (value, u, iterations, residual)."""

    def g(u):
        w = w0 + fvec @ u
        wp = w if w > 0.0 else 0.0
        wm = w if w < 0.0 else 0.0
        return float(u @ M @ u + lin @ u + a * wp * wp + b * wm * wm)

    def grad(u):
        w = w0 + fvec @ u
        dphi = 2.0 * a * max(w, 0.0) + 2.0 * b * min(w, 0.0)
        return 2.0 * (M @ u) + lin + dphi * fvec

    scale = 1.0 + float(np.abs(lin).max(initial=0.0)) + abs(w0)
    lip = 2.0 * float(np.linalg.norm(M, 2)) + 2.0 * max(a, b, 0.0) * float(
        fvec @ fvec
    )
    step = 1.0 / max(lip, 1e-12)

    try:
        u = cone.project(np.linalg.solve(M + 1e-14 * np.eye(len(lin)), -0.5 * lin))
        if not np.all(np.isfinite(u)):
            u = np.zeros_like(lin)
    except np.linalg.LinAlgError:
        u = np.zeros_like(lin)
    gu = g(u)
    gr = grad(u)

    it = 0
    residual = float(np.linalg.norm(u - cone.project(u - gr)))
    while residual > tol and it < max_iter:
        t = step
        stalled = False
        while True:
            u_new = cone.project(u - t * gr)
            d = u_new - u
            gn = g(u_new)
            if gn <= gu + float(gr @ d) + float(d @ d) / (2.0 * t) + 1e-18:
                break
            t *= 0.5
            if t < 1e-18:
                stalled = True
                break
        s = u_new - u
        if stalled or not s.any():
            # either every step fails sufficient decrease or the accepted
            # trial rounds back onto u: the iterate is at its floating-point
            # resolution limit and cannot move again
            break
        gr_new = grad(u_new)
        y = gr_new - gr
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-300 else 1.0 / max(lip, 1e-12)
        step = min(max(step, 1e-12), 1e12)
        u, gu, gr = u_new, gn, gr_new
        it += 1
        residual = float(np.linalg.norm(u - cone.project(u - gr)))
        if float(np.linalg.norm(u)) > 1e13 * scale:
            raise NonCoercive("projected gradient iterates diverge")
    return gu, u, it, residual


def minimize_h_post(
    side: str, theta: float, t: float, p: float, q, problem: LQProblem
) -> MinResult:
    """Exact/numerical minimum of the post-default Hamiltonian at (t, theta)."""
    _check_side(side)
    if p < 0.0:
        raise ConvexityViolated(f"p = {p:g} < 0")
    cs = coefficient_at(problem, t, "post", theta)
    M, lin, const = _reduced_terms(side, "post", p, q, cs)
    m = problem.m
    if m == 1:
        core, u = quadmin_scalar(float(M[0, 0]), float(lin[0]), problem.cone.is_orthant)
        return MinResult(core + const, np.array([u]), 0, 0.0)
    if not problem.cone.is_orthant:
        core, u = _fullspace_quadratic(M, lin)
        return MinResult(core + const, u, 0, 0.0)
    core, u, it, res = _pgd(M, lin, 0.0, np.zeros(m), 0.0, 0.0, problem.cone)
    return MinResult(core + const, u, it, res)


def minimize_h_pre(
    side: str, t: float, p: float, q, l1: float, l2: float, problem: LQProblem
) -> MinResult:
    """Minimum of the pre-default (jump-coupled) Hamiltonian at time t."""
    _check_side(side)
    if p < 0.0:
        raise ConvexityViolated(f"p = {p:g} < 0")
    if side == "plus":
        if l1 + p < 0.0 or l2 < 0.0:
            raise ConvexityViolated(
                f"plus-side certificates failed: l1+p = {l1 + p:g}, l2 = {l2:g}"
            )
    else:
        if l1 < 0.0 or l2 + p < 0.0:
            raise ConvexityViolated(
                f"minus-side certificates failed: l1 = {l1:g}, l2+p = {l2 + p:g}"
            )
    cs = coefficient_at(problem, t, "pre")
    M, lin, const = _reduced_terms(side, "pre", p, q, cs)
    lam, e = cs.lam, cs.e
    if side == "plus":
        a = lam * (l1 + p)
        b = lam * l2
        w0 = 1.0 + e
        shift = -a
    else:
        a = lam * l1
        b = lam * (l2 + p)
        w0 = -(1.0 + e)
        shift = -b
    m = problem.m
    if m == 1:
        core, u = hmin_scalar(
            float(M[0, 0]), float(lin[0]), w0, float(cs.f[0]), a, b,
            problem.cone.is_orthant,
        )
        return MinResult(core + const + shift, np.array([u]), 0, 0.0)
    core, u, it, res = _pgd(M, lin, w0, cs.f.copy(), a, b, problem.cone)
    return MinResult(core + const + shift, u, it, res)


def grid_oracle_min(
    side: str,
    phase: str,
    inputs: HamiltonianInput,
    bounds: float,
    resolution: int,
) -> MinResult:
    """Solver-independent reference minimum over the box [-bounds, bounds]^m
    (intersected with the cone): lattice scan, then derivative-free shrinking
    stencil refinement with a quadratic-fit jump candidate.

    Only m <= 2 is supported; the cost is exponential in m by construction.
    """
    if side != inputs.side or phase != inputs.phase:
        raise SchemaError("side/phase disagree with the bundled inputs")
    m = inputs.cone.dim
    if m > 2:
        raise SchemaError(f"grid oracle supports m <= 2, got m = {m}")
    if resolution < 3:
        raise SchemaError("resolution must be >= 3")
    g = hamiltonian_objective(inputs)
    lo = 0.0 if inputs.cone.is_orthant else -bounds
    axis = np.linspace(lo, bounds, resolution)
    if m == 1:
        lattice = axis[:, None]
    else:
        u1, u2 = np.meshgrid(axis, axis, indexing="ij")
        lattice = np.stack([u1.ravel(), u2.ravel()], axis=1)
    vals = g(lattice)
    ibest = int(np.argmin(vals))
    best_u = lattice[ibest].copy()
    best_v = float(vals[ibest])
    evals = lattice.shape[0]

    # shrinking stencil refinement: axis +/- rho points, diagonal points for
    # m = 2, and a per-axis 3-point quadratic-fit vertex, all clipped to the
    # cone and box; shrink rho whenever nothing improves.  One batched
    # objective call covers the stencil plus raw (unclipped) fit probes, a
    # second evaluates the fit vertex.
    rho = float(axis[1] - axis[0])
    rho_min = 1e-7 * max(1.0, bounds)
    nstencil = 2 * m + (4 if m == 2 else 0)
    for _ in range(200):
        if rho < rho_min:
            break
        cands = []
        offs = (-rho, rho)
        for ax in range(m):
            for o in offs:
                c = best_u.copy()
                c[ax] += o
                cands.append(c)
        if m == 2:
            for o1 in offs:
                for o2 in offs:
                    c = best_u.copy()
                    c[0] += o1
                    c[1] += o2
                    cands.append(c)
        probes = cands[: 2 * m]
        arr = np.asarray(cands + probes)
        np.clip(arr[:nstencil], lo, bounds, out=arr[:nstencil])
        if inputs.cone.is_orthant:
            np.maximum(arr[:nstencil], 0.0, out=arr[:nstencil])
        cv = g(arr)
        evals += arr.shape[0]
        # quadratic fit along each axis through the raw (u-rho, u, u+rho)
        fit = best_u.copy()
        for ax in range(m):
            gm = float(cv[nstencil + 2 * ax])
            gp = float(cv[nstencil + 2 * ax + 1])
            den = gm - 2.0 * best_v + gp
            if den > 0.0:
                fit[ax] = best_u[ax] + 0.5 * rho * (gm - gp) / den
        fit = np.clip(fit, lo, bounds)
        if inputs.cone.is_orthant:
            fit = np.maximum(fit, 0.0)
        fv = float(g(fit[None, :])[0])
        evals += 1
        j = int(np.argmin(cv[:nstencil]))
        best_cand_v = float(cv[j])
        if fv < best_cand_v:
            best_cand_v, best_cand_u = fv, fit
        else:
            best_cand_u = arr[j]
        if best_cand_v < best_v:
            best_v = best_cand_v
            best_u = best_cand_u.copy()
        else:
            rho *= 0.5
    return MinResult(best_v, best_u, evals, rho)
