"""Exact minimization of the scalar-control Hamiltonian core.

Every Hamiltonian this library minimizes reduces, for control dimension 1, to

    g(u) = alpha u^2 + beta u + a (w^+)^2 + b (w^-)^2,   w = w0 + fj u,

over u in R (full space) or u >= 0 (orthant). Constants (p|C|^2 and the
jump-compensation offsets) are added by callers; they do not move the argmin.

g is piecewise quadratic with one kink at w = 0, so the exact minimum is
attained at a piece vertex clamped into its piece-and-cone interval, at the
kink, or at 0. The enumeration below is exact for convex pieces and still
correct for mildly nonconvex inputs as long as the objective is coercive;
genuinely unbounded objectives raise NonCoercive.

Two implementations: `hmin_scalar` on Python floats (authoritative) and
`hmin_vector` on numpy arrays. They mirror each other operation-for-operation
so results agree to the last bit; the compiled kernel mirrors the scalar one.
Keep the three in sync when touching any of them.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonCoercive

_INF = float("inf")


def _coercive_up(A: float, B: float) -> bool:
    return A > 0.0 or (A == 0.0 and B >= 0.0)


def _coercive_down(A: float, B: float) -> bool:
    return A > 0.0 or (A == 0.0 and B <= 0.0)


def hmin_scalar(
    alpha: float,
    beta: float,
    w0: float,
    fj: float,
    a: float,
    b: float,
    orthant: bool,
):
    """Exact (value, argmin) of g over the cone. Raises NonCoercive."""
    Ap = alpha + a * fj * fj
    Bp = beta + 2.0 * a * w0 * fj
    Am = alpha + b * fj * fj
    Bm = beta + 2.0 * b * w0 * fj

    if fj > 0.0:
        Au, Bu = Ap, Bp
        Ad, Bd = Am, Bm
    elif fj < 0.0:
        Au, Bu = Am, Bm
        Ad, Bd = Ap, Bp
    elif w0 >= 0.0:
        Au, Bu = Ap, Bp
        Ad, Bd = Ap, Bp
    else:
        Au, Bu = Am, Bm
        Ad, Bd = Am, Bm
    if not _coercive_up(Au, Bu):
        raise NonCoercive(
            f"objective unbounded below as u -> +inf (lead {Au:g}, slope {Bu:g})"
        )
    if not orthant and not _coercive_down(Ad, Bd):
        raise NonCoercive(
            f"objective unbounded below as u -> -inf (lead {Ad:g}, slope {Bd:g})"
        )

    def geval(u: float) -> float:
        w = w0 + fj * u
        wp = w if w > 0.0 else 0.0
        wm = w if w < 0.0 else 0.0
        return alpha * u * u + beta * u + a * wp * wp + b * wm * wm

    best_u = 0.0
    best_v = geval(0.0)

    def consider(u: float):
        nonlocal best_u, best_v
        v = geval(u)
        if v < best_v or (v == best_v and abs(u) < abs(best_u)):
            best_v = v
            best_u = u

    if fj != 0.0:
        ub = -w0 / fj
        consider(max(ub, 0.0) if orthant else ub)
        if fj > 0.0:
            lo_p, hi_p = ub, _INF
            lo_m, hi_m = -_INF, ub
        else:
            lo_p, hi_p = -_INF, ub
            lo_m, hi_m = ub, _INF
    elif w0 >= 0.0:
        lo_p, hi_p = -_INF, _INF
        lo_m, hi_m = _INF, -_INF
    else:
        lo_p, hi_p = _INF, -_INF
        lo_m, hi_m = -_INF, _INF

    if orthant:
        lo_p = max(lo_p, 0.0)
        lo_m = max(lo_m, 0.0)

    if Ap > 0.0 and lo_p <= hi_p:
        vp = -Bp / (2.0 * Ap)
        consider(min(max(vp, lo_p), hi_p))
    if Am > 0.0 and lo_m <= hi_m:
        vm = -Bm / (2.0 * Am)
        consider(min(max(vm, lo_m), hi_m))

    return best_v, best_u


def hmin_vector(alpha, beta, w0, fj, a, b, orthant: bool):
    """Vectorized twin of hmin_scalar (same candidate order and updates)."""
    alpha, beta, w0, fj, a, b = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (alpha, beta, w0, fj, a, b))
    )
    Ap = alpha + a * fj * fj
    Bp = beta + 2.0 * a * w0 * fj
    Am = alpha + b * fj * fj
    Bm = beta + 2.0 * b * w0 * fj

    fjpos = fj > 0.0
    fjneg = fj < 0.0
    upper = fjpos | (~fjneg & (w0 >= 0.0))
    Au = np.where(upper, Ap, Am)
    Bu = np.where(upper, Bp, Bm)
    bad = ~((Au > 0.0) | ((Au == 0.0) & (Bu >= 0.0)))
    if not orthant:
        lower = fjneg | (~fjpos & (w0 >= 0.0))
        Ad = np.where(lower, Ap, Am)
        Bd = np.where(lower, Bp, Bm)
        bad = bad | ~((Ad > 0.0) | ((Ad == 0.0) & (Bd <= 0.0)))
    if np.any(bad):
        idx = tuple(int(k) for k in np.unravel_index(int(np.argmax(bad)), bad.shape))
        raise NonCoercive(f"objective unbounded below on the cone at index {idx}")

    def geval(u):
        w = w0 + fj * u
        wp = np.where(w > 0.0, w, 0.0)
        wm = np.where(w < 0.0, w, 0.0)
        return alpha * u * u + beta * u + a * wp * wp + b * wm * wm

    best_u = np.zeros_like(alpha)
    best_v = geval(best_u)

    def consider(u, valid):
        nonlocal best_u, best_v
        with np.errstate(invalid="ignore"):
            v = np.where(valid, geval(u), _INF)
        upd = (v < best_v) | ((v == best_v) & (np.abs(u) < np.abs(best_u)))
        best_v = np.where(upd, v, best_v)
        best_u = np.where(upd, u, best_u)

    fjzero = ~(fjpos | fjneg)
    with np.errstate(divide="ignore", invalid="ignore"):
        ub = np.where(fjzero, 0.0, -w0 / np.where(fjzero, 1.0, fj))
    ub_cand = np.maximum(ub, 0.0) if orthant else ub
    consider(ub_cand, ~fjzero)

    w0pos = w0 >= 0.0
    lo_p = np.where(fjzero, np.where(w0pos, -_INF, _INF), np.where(fjpos, ub, -_INF))
    hi_p = np.where(fjzero, np.where(w0pos, _INF, -_INF), np.where(fjpos, _INF, ub))
    lo_m = np.where(fjzero, np.where(w0pos, _INF, -_INF), np.where(fjpos, -_INF, ub))
    hi_m = np.where(fjzero, np.where(w0pos, -_INF, _INF), np.where(fjpos, ub, _INF))
    if orthant:
        lo_p = np.maximum(lo_p, 0.0)
        lo_m = np.maximum(lo_m, 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        vp = -Bp / np.where(Ap > 0.0, 2.0 * Ap, 1.0)
        vm = -Bm / np.where(Am > 0.0, 2.0 * Am, 1.0)
    vp = np.minimum(np.maximum(vp, lo_p), hi_p)
    vm = np.minimum(np.maximum(vm, lo_m), hi_m)
    consider(vp, (Ap > 0.0) & (lo_p <= hi_p))
    consider(vm, (Am > 0.0) & (lo_m <= hi_m))

    return best_v, best_u


def quadmin_scalar(alpha: float, beta: float, orthant: bool):
    """(value, argmin) of alpha u^2 + beta u over the cone (no jump term)."""
    if alpha > 0.0:
        if orthant and beta >= 0.0:
            return 0.0, 0.0
        u = -beta / (2.0 * alpha)
        return alpha * u * u + beta * u, u
    if alpha == 0.0:
        if (orthant and beta >= 0.0) or (not orthant and beta == 0.0):
            return 0.0, 0.0
        raise NonCoercive(f"linear objective with slope {beta:g} on the cone")
    raise NonCoercive(f"concave quadratic objective (lead {alpha:g})")


def quadmin_vector(alpha, beta, orthant: bool):
    """Vectorized twin of quadmin_scalar."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if orthant:
        bad = (alpha < 0.0) | ((alpha == 0.0) & (beta < 0.0))
    else:
        bad = (alpha < 0.0) | ((alpha == 0.0) & (beta != 0.0))
    if np.any(bad):
        idx = tuple(int(k) for k in np.unravel_index(int(np.argmax(bad)), bad.shape))
        raise NonCoercive(f"quadratic objective unbounded below at index {idx}")
    with np.errstate(divide="ignore", invalid="ignore"):
        u = -beta / np.where(alpha > 0.0, 2.0 * alpha, 1.0)
    u = np.where(alpha > 0.0, u, 0.0)
    if orthant:
        u = np.where(beta >= 0.0, 0.0, u)
    val = alpha * u * u + beta * u
    return val, u
