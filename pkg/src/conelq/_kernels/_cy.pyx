# Compiled twin of _np.py. Every function mirrors its numpy counterpart
# operation for operation: identical formulas, identical association order,
# identical branch structure. Built with -ffp-contract=off and without
# -ffast-math so results are bitwise-equal to the numpy backend; any edit
# here must be replicated in _np.py (and vice versa).
#
# Error paths carry the same exception class and node attribution. Message
# detail matches too, except when one integrator stage holds several
# non-coercive entries at once: the vectorized backend reports the first in
# row-major scan order, this one the first per theta-slice.

from libc.math cimport fabs, sqrt, NAN

import numpy as np

from conelq.errors import BlowUp, ConvexityViolated, NonCoercive, NonFinite

cdef double INF = float("inf")
cdef double NEG_TOL = -1e-9


# ---------------------------------------------------------------- minimizers

cdef inline double _geval(double u, double alpha, double beta, double w0,
                          double fj, double a, double b) noexcept:
    cdef double w = w0 + fj * u
    cdef double wp = w if w > 0.0 else 0.0
    cdef double wm = w if w < 0.0 else 0.0
    return alpha * u * u + beta * u + a * wp * wp + b * wm * wm


cdef double _hmin(double alpha, double beta, double w0, double fj,
                  double a, double b, bint orthant, double* uout) except? -1.0:
    # mirrors hmin.hmin_scalar
    cdef double Ap = alpha + a * fj * fj
    cdef double Bp = beta + 2.0 * a * w0 * fj
    cdef double Am = alpha + b * fj * fj
    cdef double Bm = beta + 2.0 * b * w0 * fj
    cdef double Au, Bu, Ad, Bd
    if fj > 0.0:
        Au = Ap; Bu = Bp; Ad = Am; Bd = Bm
    elif fj < 0.0:
        Au = Am; Bu = Bm; Ad = Ap; Bd = Bp
    elif w0 >= 0.0:
        Au = Ap; Bu = Bp; Ad = Ap; Bd = Bp
    else:
        Au = Am; Bu = Bm; Ad = Am; Bd = Bm
    if not (Au > 0.0 or (Au == 0.0 and Bu >= 0.0)):
        raise NonCoercive(
            "objective unbounded below as u -> +inf (lead %g, slope %g)" % (Au, Bu)
        )
    if (not orthant) and not (Ad > 0.0 or (Ad == 0.0 and Bd <= 0.0)):
        raise NonCoercive(
            "objective unbounded below as u -> -inf (lead %g, slope %g)" % (Ad, Bd)
        )

    cdef double best_u = 0.0
    cdef double best_v = _geval(0.0, alpha, beta, w0, fj, a, b)
    cdef double ub = 0.0
    cdef double lo_p, hi_p, lo_m, hi_m, cand, v

    if fj != 0.0:
        ub = -w0 / fj
        cand = ub
        if orthant and cand < 0.0:
            cand = 0.0
        v = _geval(cand, alpha, beta, w0, fj, a, b)
        if v < best_v or (v == best_v and fabs(cand) < fabs(best_u)):
            best_v = v
            best_u = cand
        if fj > 0.0:
            lo_p = ub; hi_p = INF; lo_m = -INF; hi_m = ub
        else:
            lo_p = -INF; hi_p = ub; lo_m = ub; hi_m = INF
    elif w0 >= 0.0:
        lo_p = -INF; hi_p = INF; lo_m = INF; hi_m = -INF
    else:
        lo_p = INF; hi_p = -INF; lo_m = -INF; hi_m = INF

    if orthant:
        if lo_p < 0.0:
            lo_p = 0.0
        if lo_m < 0.0:
            lo_m = 0.0

    if Ap > 0.0 and lo_p <= hi_p:
        cand = -Bp / (2.0 * Ap)
        if cand < lo_p:
            cand = lo_p
        if cand > hi_p:
            cand = hi_p
        v = _geval(cand, alpha, beta, w0, fj, a, b)
        if v < best_v or (v == best_v and fabs(cand) < fabs(best_u)):
            best_v = v
            best_u = cand
    if Am > 0.0 and lo_m <= hi_m:
        cand = -Bm / (2.0 * Am)
        if cand < lo_m:
            cand = lo_m
        if cand > hi_m:
            cand = hi_m
        v = _geval(cand, alpha, beta, w0, fj, a, b)
        if v < best_v or (v == best_v and fabs(cand) < fabs(best_u)):
            best_v = v
            best_u = cand

    uout[0] = best_u
    return best_v


cdef double _quadmin(double alpha, double beta, bint orthant,
                     double* uout) except? -1.0:
    # mirrors hmin.quadmin_scalar (same arithmetic as quadmin_vector)
    cdef double u
    if alpha > 0.0:
        if orthant and beta >= 0.0:
            uout[0] = 0.0
            return 0.0
        u = -beta / (2.0 * alpha)
        uout[0] = u
        return alpha * u * u + beta * u
    if alpha == 0.0:
        if (orthant and beta >= 0.0) or ((not orthant) and beta == 0.0):
            uout[0] = 0.0
            return 0.0
        raise NonCoercive("linear objective with slope %g on the cone" % beta)
    raise NonCoercive("concave quadratic objective (lead %g)" % alpha)


cdef inline double _guard(double p) noexcept:
    if p >= 0.0:
        return p
    if p > NEG_TOL:
        return 0.0
    return p


cdef int _check_val(double p, double nn, double ceiling, int node, double h,
                    str what) except -1:
    if not (fabs(p) <= ceiling and fabs(nn) <= ceiling):
        if not (fabs(p) < INF and fabs(nn) < INF):
            raise NonFinite("%s: non-finite value at node %d (t=%g)" % (what, node, node * h))
        raise BlowUp(
            "%s: |value| exceeded ceiling %g at node %d (t=%g); "
            "invalid problem or too-coarse grid" % (what, ceiling, node, node * h)
        )
    return 0


# ------------------------------------------------------------------ triangle

cdef inline bint _quad_bad(double alpha, double beta, bint orthant) noexcept:
    if orthant:
        return alpha < 0.0 or (alpha == 0.0 and beta < 0.0)
    return alpha < 0.0 or (alpha == 0.0 and beta != 0.0)


cdef int _ftri(double* ab, double* asl, double* bb, double* bsl,
               double* cb, double* csl, double* db, double* dsl,
               double* qb, double* qsl, double* rb, double* rsl,
               int s, double th, double p, double nn, bint orthant,
               int vec_j, double* fp, double* fn) except -1:
    # vec_j >= 0 selects the vectorized-path failure message (index into the
    # (2, i) stage slab); vec_j < 0 keeps the scalar-path messages.
    cdef double A = ab[s] + asl[s] * th
    cdef double C = cb[s] + csl[s] * th
    cdef double D = db[s] + dsl[s] * th
    cdef double Qq = qb[s] + qsl[s] * th
    cdef double R = rb[s] + rsl[s] * th
    cdef double cc = C * C
    cdef double dd = D * D
    cdef double bcd = (bb[s] + bsl[s] * th) + C * D
    cdef double pe = _guard(p)
    cdef double ne = _guard(nn)
    cdef double alpha_p = R + pe * dd
    cdef double beta_p = 2.0 * pe * bcd
    cdef double alpha_n = R + ne * dd
    cdef double beta_n = -2.0 * ne * bcd
    if vec_j >= 0:
        if _quad_bad(alpha_p, beta_p, orthant):
            raise NonCoercive(
                "quadratic objective unbounded below at index (0, %d)" % vec_j
            )
        if _quad_bad(alpha_n, beta_n, orthant):
            raise NonCoercive(
                "quadratic objective unbounded below at index (1, %d)" % vec_j
            )
    cdef double up, un
    cdef double core_p = _quadmin(alpha_p, beta_p, orthant, &up)
    cdef double core_n = _quadmin(alpha_n, beta_n, orthant, &un)
    fp[0] = 2.0 * A * pe + Qq + pe * cc + core_p
    fn[0] = 2.0 * A * ne + Qq + ne * cc + core_n
    return 0


def triangle_separable(int n, double h, bint orthant, bint const_mode,
                       ab, asl, bb, bsl, cb, csl, db, dsl, qb, qsl, rb, rsl,
                       g1, double ceiling):
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    P1 = np.full((n + 1, n + 1), np.nan)
    N1 = np.full((n + 1, n + 1), np.nan)
    cdef double[:, ::1] P1v = P1
    cdef double[:, ::1] N1v = N1
    g1a = np.ascontiguousarray(g1, dtype=np.float64)
    cdef double[::1] g1v = g1a
    cdef int i, j, s1, s2, s3
    cdef double p, nn, kp1, kn1, kp2, kn2, kp3, kn3, kp4, kn4, th
    cdef double[::1] pvv
    cdef double[::1] nvv
    cdef double[::1] Ypv
    cdef double[::1] Ynv

    cdef double[::1] abv = np.ascontiguousarray(ab, dtype=np.float64)
    cdef double[::1] aslv = np.ascontiguousarray(asl, dtype=np.float64)
    cdef double[::1] bbv = np.ascontiguousarray(bb, dtype=np.float64)
    cdef double[::1] bslv = np.ascontiguousarray(bsl, dtype=np.float64)
    cdef double[::1] cbv = np.ascontiguousarray(cb, dtype=np.float64)
    cdef double[::1] cslv = np.ascontiguousarray(csl, dtype=np.float64)
    cdef double[::1] dbv = np.ascontiguousarray(db, dtype=np.float64)
    cdef double[::1] dslv = np.ascontiguousarray(dsl, dtype=np.float64)
    cdef double[::1] qbv = np.ascontiguousarray(qb, dtype=np.float64)
    cdef double[::1] qslv = np.ascontiguousarray(qsl, dtype=np.float64)
    cdef double[::1] rbv = np.ascontiguousarray(rb, dtype=np.float64)
    cdef double[::1] rslv = np.ascontiguousarray(rsl, dtype=np.float64)
    cdef double* pab = &abv[0]
    cdef double* pasl = &aslv[0]
    cdef double* pbb = &bbv[0]
    cdef double* pbsl = &bslv[0]
    cdef double* pcb = &cbv[0]
    cdef double* pcsl = &cslv[0]
    cdef double* pdb = &dbv[0]
    cdef double* pdsl = &dslv[0]
    cdef double* pqb = &qbv[0]
    cdef double* pqsl = &qslv[0]
    cdef double* prb = &rbv[0]
    cdef double* prsl = &rslv[0]

    for j in range(n + 1):
        P1v[n, j] = g1v[j]
        N1v[n, j] = g1v[j]

    if const_mode:
        p = g1v[0]
        nn = g1v[0]
        pvals = np.empty(n + 1)
        nvals = np.empty(n + 1)
        pvv = pvals
        nvv = nvals
        pvv[n] = p
        nvv[n] = nn
        for i in range(n, 0, -1):
            s1 = 2 * i; s2 = 2 * i - 1; s3 = 2 * i - 2
            try:
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s1, 0.0, p, nn, orthant, -1, &kp1, &kn1)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s2, 0.0, p + h2 * kp1, nn + h2 * kn1, orthant, -1, &kp2, &kn2)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s2, 0.0, p + h2 * kp2, nn + h2 * kn2, orthant, -1, &kp3, &kn3)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s3, 0.0, p + h * kp3, nn + h * kn3, orthant, -1, &kp4, &kn4)
            except NonCoercive as exc:
                raise NonCoercive(
                    "post-default pair: %s (step to node %d, t=%g)"
                    % (exc, i - 1, (i - 1) * h)
                ) from exc
            p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
            nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
            _check_val(p, nn, ceiling, i - 1, h, "post-default pair")
            pvv[i - 1] = p
            nvv[i - 1] = nn
        for i in range(n + 1):
            for j in range(i + 1):
                P1v[i, j] = pvv[i]
                N1v[i, j] = nvv[i]
        return P1, N1

    Yp = np.empty(n + 1)
    Yn = np.empty(n + 1)
    Ypv = Yp
    Ynv = Yn
    for j in range(n + 1):
        Ypv[j] = g1v[j]
        Ynv[j] = g1v[j]

    for i in range(n, 0, -1):
        s1 = 2 * i; s2 = 2 * i - 1; s3 = 2 * i - 2
        for j in range(i):
            th = j * h
            p = Ypv[j]
            nn = Ynv[j]
            try:
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s1, th, p, nn, orthant, j, &kp1, &kn1)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s2, th, p + h2 * kp1, nn + h2 * kn1, orthant, j, &kp2, &kn2)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s2, th, p + h2 * kp2, nn + h2 * kn2, orthant, j, &kp3, &kn3)
                _ftri(pab, pasl, pbb, pbsl, pcb, pcsl, pdb, pdsl, pqb, pqsl,
                      prb, prsl, s3, th, p + h * kp3, nn + h * kn3, orthant, j, &kp4, &kn4)
            except NonCoercive as exc:
                raise NonCoercive(
                    "post-default pair: %s (step to node %d, t=%g)"
                    % (exc, i - 1, (i - 1) * h)
                ) from exc
            p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
            nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
            _check_val(p, nn, ceiling, i - 1, h, "post-default pair")
            Ypv[j] = p
            Ynv[j] = nn
            P1v[i - 1, j] = p
            N1v[i - 1, j] = nn
    return P1, N1


# ------------------------------------------------------------------ pre pair

cdef int _fpre(double* ah, double* bh, double* ch, double* dh, double* eh,
               double* fh, double* qh, double* rh, double* lh,
               double* dPl, double* dNl,
               int s, double h2, double p, double nn, bint orthant,
               double* fp, double* fn) except -1:
    cdef double A = ah[s]
    cdef double e = eh[s]
    cdef double fj = fh[s]
    cdef double lm = lh[s]
    cdef double dp = dPl[s]
    cdef double dn = dNl[s]
    if dp < 0.0:
        if dp < NEG_TOL:
            raise ConvexityViolated(
                "jump certificate failed: diagP = %g < 0 at t=%g" % (dp, s * h2)
            )
        dp = 0.0
    if dn < 0.0:
        if dn < NEG_TOL:
            raise ConvexityViolated(
                "jump certificate failed: diagN = %g < 0 at t=%g" % (dn, s * h2)
            )
        dn = 0.0
    cdef double pe = _guard(p)
    cdef double ne = _guard(nn)
    cdef double cc = ch[s] * ch[s]
    cdef double dd = dh[s] * dh[s]
    cdef double bcd = (bh[s] - lm * fj) + ch[s] * dh[s]
    cdef double aj = lm * dp
    cdef double bj = lm * dn
    cdef double twoa = 2.0 * (A - lm * e)
    cdef double up, un
    cdef double core_p = _hmin(rh[s] + pe * dd, 2.0 * pe * bcd, 1.0 + e, fj,
                               aj, bj, orthant, &up)
    cdef double core_n = _hmin(rh[s] + ne * dd, -2.0 * ne * bcd, -(1.0 + e), fj,
                               aj, bj, orthant, &un)
    fp[0] = twoa * pe + qh[s] + (core_p + pe * cc - aj) + lm * (dp - pe)
    fn[0] = twoa * ne + qh[s] + (core_n + ne * cc - bj) + lm * (dn - ne)
    return 0


def pre_pair(int n, double h, bint orthant,
             a0, b0, c0, d0, e0, f0, q0, r0, lam,
             dP, dN, double g0, double ceiling):
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    cdef double[::1] av = np.ascontiguousarray(a0, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b0, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d0, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(e0, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(f0, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(q0, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(r0, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] dPv = np.ascontiguousarray(dP, dtype=np.float64)
    cdef double[::1] dNv = np.ascontiguousarray(dN, dtype=np.float64)
    cdef double* pa = &av[0]
    cdef double* pb = &bv[0]
    cdef double* pc = &cv[0]
    cdef double* pd = &dv[0]
    cdef double* pe_ = &ev[0]
    cdef double* pf = &fv[0]
    cdef double* pq = &qv[0]
    cdef double* pr = &rv[0]
    cdef double* pl = &lv[0]
    cdef double* pdP = &dPv[0]
    cdef double* pdN = &dNv[0]

    P0 = np.empty(n + 1)
    N0 = np.empty(n + 1)
    cdef double[::1] P0v = P0
    cdef double[::1] N0v = N0
    cdef double p = g0
    cdef double nn = g0
    cdef int i, s1, s2, s3
    cdef double kp1, kn1, kp2, kn2, kp3, kn3, kp4, kn4
    P0v[n] = g0
    N0v[n] = g0
    for i in range(n, 0, -1):
        s1 = 2 * i; s2 = 2 * i - 1; s3 = 2 * i - 2
        try:
            _fpre(pa, pb, pc, pd, pe_, pf, pq, pr, pl, pdP, pdN,
                  s1, h2, p, nn, orthant, &kp1, &kn1)
            _fpre(pa, pb, pc, pd, pe_, pf, pq, pr, pl, pdP, pdN,
                  s2, h2, p + h2 * kp1, nn + h2 * kn1, orthant, &kp2, &kn2)
            _fpre(pa, pb, pc, pd, pe_, pf, pq, pr, pl, pdP, pdN,
                  s2, h2, p + h2 * kp2, nn + h2 * kn2, orthant, &kp3, &kn3)
            _fpre(pa, pb, pc, pd, pe_, pf, pq, pr, pl, pdP, pdN,
                  s3, h2, p + h * kp3, nn + h * kn3, orthant, &kp4, &kn4)
        except NonCoercive as exc:
            raise NonCoercive(
                "pre-default pair: %s (step to node %d, t=%g)" % (exc, i - 1, (i - 1) * h)
            ) from exc
        p = p + h6 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
        nn = nn + h6 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
        _check_val(p, nn, ceiling, i - 1, h, "pre-default pair")
        P0v[i - 1] = p
        N0v[i - 1] = nn
    return P0, N0


# ---------------------------------------------------------------- simulation

def sim_blocks(double x0, int n, double h,
               a0, b0, c0, d0, e0, f0, q0, r0, lam,
               xp0, xm0,
               a1b, a1s, b1b, b1s, c1b, c1s, d1b, d1s, q1b, q1s, r1b, r1s,
               xp1, xm1,
               double g0, g1, clam, Z, Theta, bint record):
    cdef double[::1] a0v = np.ascontiguousarray(a0, dtype=np.float64)
    cdef double[::1] b0v = np.ascontiguousarray(b0, dtype=np.float64)
    cdef double[::1] c0v = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[::1] d0v = np.ascontiguousarray(d0, dtype=np.float64)
    cdef double[::1] e0v = np.ascontiguousarray(e0, dtype=np.float64)
    cdef double[::1] f0v = np.ascontiguousarray(f0, dtype=np.float64)
    cdef double[::1] q0v = np.ascontiguousarray(q0, dtype=np.float64)
    cdef double[::1] r0v = np.ascontiguousarray(r0, dtype=np.float64)
    cdef double[::1] lamv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] xp0v = np.ascontiguousarray(xp0, dtype=np.float64)
    cdef double[::1] xm0v = np.ascontiguousarray(xm0, dtype=np.float64)
    cdef double[::1] a1bv = np.ascontiguousarray(a1b, dtype=np.float64)
    cdef double[::1] a1sv = np.ascontiguousarray(a1s, dtype=np.float64)
    cdef double[::1] b1bv = np.ascontiguousarray(b1b, dtype=np.float64)
    cdef double[::1] b1sv = np.ascontiguousarray(b1s, dtype=np.float64)
    cdef double[::1] c1bv = np.ascontiguousarray(c1b, dtype=np.float64)
    cdef double[::1] c1sv = np.ascontiguousarray(c1s, dtype=np.float64)
    cdef double[::1] d1bv = np.ascontiguousarray(d1b, dtype=np.float64)
    cdef double[::1] d1sv = np.ascontiguousarray(d1s, dtype=np.float64)
    cdef double[::1] q1bv = np.ascontiguousarray(q1b, dtype=np.float64)
    cdef double[::1] q1sv = np.ascontiguousarray(q1s, dtype=np.float64)
    cdef double[::1] r1bv = np.ascontiguousarray(r1b, dtype=np.float64)
    cdef double[::1] r1sv = np.ascontiguousarray(r1s, dtype=np.float64)
    cdef double[:, ::1] xp1v = np.ascontiguousarray(xp1, dtype=np.float64)
    cdef double[:, ::1] xm1v = np.ascontiguousarray(xm1, dtype=np.float64)
    cdef double[::1] g1v = np.ascontiguousarray(g1, dtype=np.float64)
    cdef double[::1] clamv = np.ascontiguousarray(clam, dtype=np.float64)
    cdef double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[::1] Thetav = np.ascontiguousarray(Theta, dtype=np.float64)

    cdef Py_ssize_t B = Thetav.shape[0]
    cost = np.empty(B)
    xT = np.empty(B)
    tau = np.empty(B)
    xleft = np.empty(B)
    cdef double[::1] costv = cost
    cdef double[::1] xTv = xT
    cdef double[::1] tauv = tau
    cdef double[::1] xleftv = xleft
    Xrec = Urec = None
    cdef double[:, ::1] Xrv
    cdef double[:, ::1] Urv
    if record:
        Xrec = np.empty((B, n + 1))
        Urec = np.zeros((B, n + 1))
        Xrv = Xrec
        Urv = Urec
    else:
        _dummy = np.zeros((1, 1))
        Xrv = _dummy
        Urv = _dummy

    cdef double sqh = sqrt(h)
    cdef Py_ssize_t b
    cdef int i, jnode, jm1, jcap, jlo, jlo2, lo, hi, mid
    cdef bint has_def, pre, cross
    cdef double th, inc, frac, y, tau_s, etau, ftau, v, g1tau, G
    cdef double x, run, xpl, xmn, u, xi1p, xi1m, drift, diff, xn
    cdef double a1, b1_, c1, d1_, q1, r1_, xx, uu, dw

    for b in range(B):
        th = Thetav[b]
        # first index with clam[idx] >= th (numpy searchsorted, side="left")
        lo = 0
        hi = n + 1
        while lo < hi:
            mid = (lo + hi) >> 1
            if clamv[mid] < th:
                lo = mid + 1
            else:
                hi = mid
        jnode = lo
        has_def = jnode <= n
        if has_def:
            jm1 = jnode - 1
            jcap = jnode
            inc = clamv[jcap] - clamv[jm1]
            frac = (th - clamv[jm1]) / (inc if inc > 0.0 else 1.0)
        else:
            jm1 = 0
            jcap = n
            frac = 0.0
        y = jm1 + frac
        tau_s = y * h
        etau = e0v[jm1] + frac * (e0v[jcap] - e0v[jm1])
        ftau = f0v[jm1] + frac * (f0v[jcap] - f0v[jm1])
        jlo = <int> y
        if jlo > n:
            jlo = n
        v = y - jlo
        jlo2 = jlo + 1 if v > 0.0 else jlo
        g1tau = g1v[jlo] + v * (g1v[jlo2] - g1v[jlo])
        G = g1tau if has_def else g0
        tauv[b] = tau_s if has_def else NAN

        x = x0
        run = 0.0
        xleftv[b] = NAN
        if record:
            Xrv[b, 0] = x
        for i in range(n):
            pre = i < jnode
            xpl = x if x > 0.0 else 0.0
            xmn = x if x < 0.0 else 0.0
            if pre:
                u = xp0v[i] * xpl + xm0v[i] * xmn
            else:
                xi1p = xp1v[i, jlo] + v * (xp1v[i, jlo2] - xp1v[i, jlo])
                xi1m = xm1v[i, jlo] + v * (xm1v[i, jlo2] - xm1v[i, jlo])
                u = xi1p * xpl + xi1m * xmn
            xx = x * x
            uu = u * u
            if pre:
                drift = (a0v[i] - lamv[i] * e0v[i]) * x + (b0v[i] - lamv[i] * f0v[i]) * u
                diff = c0v[i] * x + d0v[i] * u
                run = run + (q0v[i] * xx + r0v[i] * uu) * h
            else:
                a1 = a1bv[i] + a1sv[i] * tau_s
                b1_ = b1bv[i] + b1sv[i] * tau_s
                c1 = c1bv[i] + c1sv[i] * tau_s
                d1_ = d1bv[i] + d1sv[i] * tau_s
                q1 = q1bv[i] + q1sv[i] * tau_s
                r1_ = r1bv[i] + r1sv[i] * tau_s
                drift = a1 * x + b1_ * u
                diff = c1 * x + d1_ * u
                run = run + (q1 * xx + r1_ * uu) * h
            dw = sqh * Zv[b, i]
            xn = x + drift * h + diff * dw
            cross = jnode == i + 1
            if cross:
                xleftv[b] = xn
                xn = xn + etau * xn + ftau * u
            x = xn
            if not (fabs(x) < INF):
                raise NonFinite(
                    "path engine: non-finite state at step %d (t=%g)" % (i + 1, (i + 1) * h)
                )
            if record:
                Xrv[b, i + 1] = x
                Urv[b, i] = u
        costv[b] = 0.5 * (run + G * x * x)
        xTv[b] = x
    return cost, xT, tau, xleft, Xrec, Urec
