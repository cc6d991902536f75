"""Vectorized numpy kernels: post-default triangle sweep, pre-default pair,
and the Euler path engine. Restricted to scalar control and scalar noise
(m = k = 1) with separable (constant/affine) theta-dependence; everything
else goes through the general pure-python integrators in riccati/simulate.

The compiled backend (_cy) mirrors every function here operation for
operation: same formulas, same association order, same branch structure, no
FMA contraction. Cross-backend tests assert bitwise-equal outputs, so any
edit here must be replicated exactly in _cy.pyx.

Time convention: integration state lives on grid nodes; coefficients are
sampled on the half grid (2n+1 points, nodes and midpoints interleaved).
Midpoints of piecewise-linear coefficient data are neighbor means (exact);
midpoints of solved curves (the post-default diagonals feeding the
pre-default pair) use 4-point cubic interpolation so the 4-stage integrator
keeps its order.
"""

from __future__ import annotations

import numpy as np

from ..errors import BlowUp, ConvexityViolated, NonCoercive, NonFinite
from .hmin import hmin_scalar, quadmin_scalar, quadmin_vector

# state values are nonnegative along the flow by the verified bounds; stage
# arithmetic may undershoot by rounding, so artifacts above this floor are
# clamped to 0 and anything below it is treated as a real violation
NEG_TOL = -1e-9


def half_linear(v: np.ndarray) -> np.ndarray:
    """Node values -> half-grid values, midpoints as neighbor means.

    Exact for the piecewise-linear coefficient convention."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0] - 1
    out = np.empty((2 * n + 1,) + v.shape[1:], dtype=float)
    out[0::2] = v
    out[1::2] = 0.5 * (v[:-1] + v[1:])
    return out


def half_cubic(v: np.ndarray) -> np.ndarray:
    """Node values -> half-grid values, midpoints by 4-point cubic stencils
    (one-sided at the ends, 3-point quadratic when only n = 2 intervals).

    Used for solved curves (diagonals), which are smooth but not piecewise
    linear; linear midpoints would cap the integrator at second order."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0] - 1
    out = np.empty(2 * n + 1, dtype=float)
    out[0::2] = v
    mid = out[1::2]
    if n == 2:
        mid[0] = 0.375 * v[0] + 0.75 * v[1] - 0.125 * v[2]
        mid[1] = -0.125 * v[0] + 0.75 * v[1] + 0.375 * v[2]
        return out
    mid[1:-1] = (-(v[0 : n - 2] + v[3 : n + 1]) + 9.0 * (v[1 : n - 1] + v[2:n])) / 16.0
    mid[0] = 0.3125 * v[0] + 0.9375 * v[1] - 0.3125 * v[2] + 0.0625 * v[3]
    mid[-1] = 0.0625 * v[n - 3] - 0.3125 * v[n - 2] + 0.9375 * v[n - 1] + 0.3125 * v[n]
    return out


def _guard_state(p):
    """Clamp tiny negative rounding artifacts of a theoretically nonnegative
    state; leave genuine violations untouched (they surface as NonCoercive
    or BlowUp with a node attached)."""
    return np.where(p >= 0.0, p, np.where(p > NEG_TOL, 0.0, p))


def _check_step(vals: np.ndarray, ceiling: float, node: int, h: float, what: str):
    ok = np.abs(vals) <= ceiling
    if not np.all(ok):
        if not np.all(np.isfinite(vals)):
            raise NonFinite(f"{what}: non-finite value at node {node} (t={node * h:g})")
        raise BlowUp(
            f"{what}: |value| exceeded ceiling {ceiling:g} at node {node} "
            f"(t={node * h:g}); invalid problem or too-coarse grid"
        )


def triangle_separable(
    n: int,
    h: float,
    orthant: bool,
    const_mode: bool,
    ab, asl, bb, bsl, cb, csl, db, dsl, qb, qsl, rb, rsl,  # (2n+1,) half-grid
    g1,  # (n+1,) terminal weight per theta node
    ceiling: float,
):
    """Backward sweep of the post-default pair over the triangle theta <= t.

    Returns (P1, N1), each (n+1, n+1) with rows indexed by t-node and columns
    by theta-node; entries with theta > t are NaN. All theta-slices advance
    simultaneously; slice j is only stepped down to node j.

    const_mode asserts that slopes are zero and g1 is constant, collapsing
    every slice to one scalar ODE pair.
    """
    h2 = 0.5 * h
    h6 = h / 6.0
    P1 = np.full((n + 1, n + 1), np.nan)
    N1 = np.full((n + 1, n + 1), np.nan)
    g1 = np.asarray(g1, dtype=float)
    P1[n, :] = g1
    N1[n, :] = g1

    if const_mode:
        # one slice serves the whole triangle
        pv = np.empty(n + 1)
        nv = np.empty(n + 1)
        pv[n] = nv[n] = float(g1[0])
        abl, bbl, cbl, dbl, qbl, rbl = (x.tolist() for x in (ab, bb, cb, db, qb, rb))

        def fconst(s: int, p: float, nn: float):
            A = abl[s]
            cc = cbl[s] * cbl[s]
            dd = dbl[s] * dbl[s]
            bcd = bbl[s] + cbl[s] * dbl[s]
            pe = p if p >= 0.0 else (0.0 if p > NEG_TOL else p)
            ne = nn if nn >= 0.0 else (0.0 if nn > NEG_TOL else nn)
            core_p, _ = quadmin_scalar(rbl[s] + pe * dd, 2.0 * pe * bcd, orthant)
            core_n, _ = quadmin_scalar(rbl[s] + ne * dd, -2.0 * ne * bcd, orthant)
            fp = 2.0 * A * pe + qbl[s] + pe * cc + core_p
            fn = 2.0 * A * ne + qbl[s] + ne * cc + core_n
            return fp, fn

        p = nv[n]
        nn = nv[n]
        for i in range(n, 0, -1):
            s1, s2, s3 = 2 * i, 2 * i - 1, 2 * i - 2
            try:
                kp1, kn1 = fconst(s1, p, nn)
                kp2, kn2 = fconst(s2, p + h2 * kp1, nn + h2 * kn1)
                kp3, kn3 = fconst(s2, p + h2 * kp2, nn + h2 * kn2)
                kp4, kn4 = fconst(s3, p + h * kp3, nn + h * kn3)
            except NonCoercive as exc:
                raise NonCoercive(
                    f"post-default pair: {exc} (step to node {i - 1}, t={(i - 1) * h:g})"
                ) from exc
            p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
            nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
            _check_step(np.array([p, nn]), ceiling, i - 1, h, "post-default pair")
            pv[i - 1] = p
            nv[i - 1] = nn
        rows = np.arange(n + 1)[:, None]
        cols = np.arange(n + 1)[None, :]
        tri = cols <= rows
        P1[:] = np.where(tri, pv[:, None], np.nan)
        N1[:] = np.where(tri, nv[:, None], np.nan)
        return P1, N1

    thetas = np.arange(n + 1) * h
    Y = np.empty((2, n + 1))
    Y[0] = g1
    Y[1] = g1

    def fstage(s: int, V: np.ndarray, th: np.ndarray):
        A = ab[s] + asl[s] * th
        C = cb[s] + csl[s] * th
        D = db[s] + dsl[s] * th
        Qq = qb[s] + qsl[s] * th
        R = rb[s] + rsl[s] * th
        cc = C * C
        dd = D * D
        bcd = (bb[s] + bsl[s] * th) + C * D
        Ve = _guard_state(V)
        alpha = R + Ve * dd
        beta = _SGN2 * Ve * bcd
        core, _ = quadmin_vector(alpha, beta, orthant)
        return 2.0 * A * Ve + Qq + Ve * cc + core

    for i in range(n, 0, -1):
        V = Y[:, :i]
        th = thetas[:i]
        s1, s2, s3 = 2 * i, 2 * i - 1, 2 * i - 2
        try:
            k1 = fstage(s1, V, th)
            k2 = fstage(s2, V + h2 * k1, th)
            k3 = fstage(s2, V + h2 * k2, th)
            k4 = fstage(s3, V + h * k3, th)
        except NonCoercive as exc:
            raise NonCoercive(
                f"post-default pair: {exc} (step to node {i - 1}, t={(i - 1) * h:g})"
            ) from exc
        Vn = V + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_step(Vn, ceiling, i - 1, h, "post-default pair")
        Y[:, :i] = Vn
        P1[i - 1, :i] = Y[0, :i]
        N1[i - 1, :i] = Y[1, :i]
    return P1, N1


_SGN2 = np.array([[2.0], [-2.0]])


def pre_pair(
    n: int,
    h: float,
    orthant: bool,
    a0, b0, c0, d0, e0, f0, q0, r0, lam,  # (2n+1,) half-grid
    dP, dN,  # (2n+1,) half-grid diagonals (cubic midpoints)
    g0: float,
    ceiling: float,
):
    """Backward solve of the coupled pre-default pair (P0, N0) on the nodes.

    Drivers (scalar control, q-slot = 0):
      P0: 2(A - lam E)P + Q + h0_plus(P; l1 = diagP - P, l2 = diagN) + lam(diagP - P)
      N0: 2(A - lam E)N + Q + h0_minus(N; l1 = diagP, l2 = diagN - N) + lam(diagN - N)

    The piecewise-quadratic weights collapse on both sides to
    a = lam*diagP, b = lam*diagN (the state shift cancels), so the convexity
    certificates reduce to nonnegativity of the diagonals, checked per stage.
    """
    h2 = 0.5 * h
    h6 = h / 6.0
    ah, bh, ch, dh, eh, fh, qh, rh, lh, dPl, dNl = (
        np.asarray(x, dtype=float).tolist()
        for x in (a0, b0, c0, d0, e0, f0, q0, r0, lam, dP, dN)
    )

    def fpre(s: int, p: float, nn: float):
        A = ah[s]
        e = eh[s]
        fj = fh[s]
        lm = lh[s]
        dp = dPl[s]
        dn = dNl[s]
        if dp < 0.0:
            if dp < NEG_TOL:
                raise ConvexityViolated(
                    f"jump certificate failed: diagP = {dp:g} < 0 at t={s * h2:g}"
                )
            dp = 0.0
        if dn < 0.0:
            if dn < NEG_TOL:
                raise ConvexityViolated(
                    f"jump certificate failed: diagN = {dn:g} < 0 at t={s * h2:g}"
                )
            dn = 0.0
        pe = p if p >= 0.0 else (0.0 if p > NEG_TOL else p)
        ne = nn if nn >= 0.0 else (0.0 if nn > NEG_TOL else nn)
        cc = ch[s] * ch[s]
        dd = dh[s] * dh[s]
        bcd = (bh[s] - lm * fj) + ch[s] * dh[s]
        aj = lm * dp
        bj = lm * dn
        twoa = 2.0 * (A - lm * e)
        core_p, _ = hmin_scalar(
            rh[s] + pe * dd, 2.0 * pe * bcd, 1.0 + e, fj, aj, bj, orthant
        )
        core_n, _ = hmin_scalar(
            rh[s] + ne * dd, -2.0 * ne * bcd, -(1.0 + e), fj, aj, bj, orthant
        )
        fp = twoa * pe + qh[s] + (core_p + pe * cc - aj) + lm * (dp - pe)
        fn = twoa * ne + qh[s] + (core_n + ne * cc - bj) + lm * (dn - ne)
        return fp, fn

    P0 = np.empty(n + 1)
    N0 = np.empty(n + 1)
    g0 = float(g0)
    P0[n] = N0[n] = g0
    p = g0
    nn = g0
    for i in range(n, 0, -1):
        s1, s2, s3 = 2 * i, 2 * i - 1, 2 * i - 2
        try:
            kp1, kn1 = fpre(s1, p, nn)
            kp2, kn2 = fpre(s2, p + h2 * kp1, nn + h2 * kn1)
            kp3, kn3 = fpre(s2, p + h2 * kp2, nn + h2 * kn2)
            kp4, kn4 = fpre(s3, p + h * kp3, nn + h * kn3)
        except NonCoercive as exc:
            raise NonCoercive(
                f"pre-default pair: {exc} (step to node {i - 1}, t={(i - 1) * h:g})"
            ) from exc
        p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
        nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
        _check_step(np.array([p, nn]), ceiling, i - 1, h, "pre-default pair")
        P0[i - 1] = p
        N0[i - 1] = nn
    return P0, N0


def sim_blocks(
    x0: float,
    n: int,
    h: float,
    a0, b0, c0, d0, e0, f0, q0, r0, lam,  # (n+1,) node arrays
    xp0, xm0,  # (n+1,) pre-default gains
    a1b, a1s, b1b, b1s, c1b, c1s, d1b, d1s, q1b, q1s, r1b, r1s,  # (n+1,) node
    xp1, xm1,  # (n+1, n+1) post-default gain triangles (NaN above diagonal)
    g0: float,
    g1,  # (n+1,)
    clam,  # (n+1,) trapezoid cumulative intensity
    Z: np.ndarray,  # (B, n) standard normals
    Theta: np.ndarray,  # (B,) Exp(1) draws
    record: bool,
):
    """Euler block engine for one batch of paths (scalar state/control/noise,
    separable post-default coefficients).

    Left-point stepping; the default jump is applied at the first node at or
    after the interpolated default time tau using the left-limit state and
    the crossing step's control; post-default coefficients are evaluated at
    (t_i, tau) and post-default gains are interpolated across the
    theta-columns of the policy triangle.

    Returns (cost, xT, tau, xleft, Xrec, Urec); tau is NaN on no-default
    paths and xleft is the left limit of the state at the jump node (NaN
    without a jump); Xrec/Urec are None unless record (Urec column n is 0,
    no control acts at the terminal node).
    """
    B = Theta.shape[0]
    sqh = np.sqrt(h)

    jnode = np.searchsorted(clam, Theta, side="left")  # in [1, n+1]; n+1 = survives
    has_def = jnode <= n
    jm1 = np.where(has_def, jnode - 1, 0)
    jcap = np.where(has_def, jnode, n)
    inc = clam[jcap] - clam[jm1]
    frac = np.where(has_def, (Theta - clam[jm1]) / np.where(inc > 0.0, inc, 1.0), 0.0)
    y = jm1 + frac
    tau_s = y * h
    tau = np.where(has_def, tau_s, np.nan)
    etau = e0[jm1] + frac * (e0[jcap] - e0[jm1])
    ftau = f0[jm1] + frac * (f0[jcap] - f0[jm1])
    jlo = np.minimum(y.astype(np.int64), n)
    v = y - jlo
    jlo2 = np.where(v > 0.0, jlo + 1, jlo)
    g1tau = g1[jlo] + v * (g1[jlo2] - g1[jlo])
    G = np.where(has_def, g1tau, g0)

    X = np.full(B, float(x0))
    run = np.zeros(B)
    xleft = np.full(B, np.nan)
    Xrec = Urec = None
    if record:
        Xrec = np.empty((B, n + 1))
        Urec = np.zeros((B, n + 1))
        Xrec[:, 0] = X

    for i in range(n):
        pre = i < jnode
        Xp = np.maximum(X, 0.0)
        Xm = np.minimum(X, 0.0)
        rowp = xp1[i]
        rowm = xm1[i]
        xi1p = rowp[jlo] + v * (rowp[jlo2] - rowp[jlo])
        xi1m = rowm[jlo] + v * (rowm[jlo2] - rowm[jlo])
        u = np.where(pre, xp0[i] * Xp + xm0[i] * Xm, xi1p * Xp + xi1m * Xm)
        a1 = a1b[i] + a1s[i] * tau_s
        b1 = b1b[i] + b1s[i] * tau_s
        c1 = c1b[i] + c1s[i] * tau_s
        d1 = d1b[i] + d1s[i] * tau_s
        q1 = q1b[i] + q1s[i] * tau_s
        r1 = r1b[i] + r1s[i] * tau_s
        xx = X * X
        uu = u * u
        drift = np.where(
            pre,
            (a0[i] - lam[i] * e0[i]) * X + (b0[i] - lam[i] * f0[i]) * u,
            a1 * X + b1 * u,
        )
        diff = np.where(pre, c0[i] * X + d0[i] * u, c1 * X + d1 * u)
        run = run + np.where(pre, q0[i] * xx + r0[i] * uu, q1 * xx + r1 * uu) * h
        Xn = X + drift * h + diff * (sqh * Z[:, i])
        cross = jnode == i + 1
        xleft = np.where(cross, Xn, xleft)
        Xn = np.where(cross, Xn + etau * Xn + ftau * u, Xn)
        X = Xn
        if not np.all(np.isfinite(X)):
            raise NonFinite(f"path engine: non-finite state at step {i + 1} (t={(i + 1) * h:g})")
        if record:
            Xrec[:, i + 1] = X
            Urec[:, i] = u

    cost = 0.5 * (run + G * X * X)
    return cost, X, tau, xleft, Xrec, Urec
