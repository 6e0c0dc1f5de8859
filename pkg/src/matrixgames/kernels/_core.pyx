# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Scalar per-game translations of the numpy reference backend in
``_reference.py``; see that module for the operation contracts. Operation
order matches the reference so results agree to float rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, isfinite

from ..errors import NoConvergence

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline double _logistic(double t) nogil:
    cdef double e
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef inline double _cara(double x, double a) nogil:
    if a == 0.0:
        return x
    return -expm1(-a * x) / a


cdef inline double _cara_da(double x, double a) nogil:
    """d/d(alpha) of CARA utility; series around t = alpha*x = 0."""
    cdef double t = a * x
    if fabs(t) < 1e-3:
        return x * x * (-0.5 + t * (1.0 / 3.0 + t * (-0.125 + t / 30.0)))
    return (t * exp(-t) + expm1(-t)) / (a * a)


def logistic(t):
    t_arr = np.ascontiguousarray(np.asarray(t, dtype=np.float64))
    out = np.empty_like(t_arr)
    cdef double[::1] src = t_arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef Py_ssize_t i, n = src.shape[0]
    for i in range(n):
        dst[i] = _logistic(src[i])
    return out if np.asarray(t).ndim else float(out.ravel()[0])


def cara(x, alpha):
    x_arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    a_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(alpha, dtype=np.float64), x_arr.shape)
    ).copy()
    out = np.empty_like(x_arr)
    cdef double[::1] xs = x_arr.ravel()
    cdef double[::1] al = a_arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef Py_ssize_t i, n = xs.shape[0]
    for i in range(n):
        dst[i] = _cara(xs[i], al[i])
    return out if np.asarray(x).ndim else float(out.ravel()[0])


def cara_dalpha(x, alpha):
    x_arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    a_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(alpha, dtype=np.float64), x_arr.shape)
    ).copy()
    out = np.empty_like(x_arr)
    cdef double[::1] xs = x_arr.ravel()
    cdef double[::1] al = a_arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef Py_ssize_t i, n = xs.shape[0]
    for i in range(n):
        dst[i] = _cara_da(xs[i], al[i])
    return out if np.asarray(x).ndim else float(out.ravel()[0])


cdef inline void _gaps(double[:, ::1] R, double[:, ::1] C, double a, Py_ssize_t i,
                       double* dr1, double* dr0, double* dc1, double* dc0) nogil:
    dr1[0] = _cara(R[i, 0], a) - _cara(R[i, 2], a)
    dr0[0] = _cara(R[i, 1], a) - _cara(R[i, 3], a)
    dc1[0] = _cara(C[i, 0], a) - _cara(C[i, 1], a)
    dc0[0] = _cara(C[i, 2], a) - _cara(C[i, 3], a)


cdef inline void _dgaps(double[:, ::1] R, double[:, ::1] C, double a, Py_ssize_t i,
                        double* ddr1, double* ddr0, double* ddc1, double* ddc0) nogil:
    ddr1[0] = _cara_da(R[i, 0], a) - _cara_da(R[i, 2], a)
    ddr0[0] = _cara_da(R[i, 1], a) - _cara_da(R[i, 3], a)
    ddc1[0] = _cara_da(C[i, 0], a) - _cara_da(C[i, 1], a)
    ddc0[0] = _cara_da(C[i, 2], a) - _cara_da(C[i, 3], a)


def _as2d(arr):
    return np.ascontiguousarray(np.asarray(arr, dtype=np.float64))


def _as1d(arr, n):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(arr, dtype=np.float64), (n,))).copy()


def levelk_all(R, C, eta_s, eta_o, alpha):
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    es_a, eo_a, al_a = _as1d(eta_s, n), _as1d(eta_o, n), _as1d(alpha, n)
    out = np.empty((n, 4), dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2, O = out
    cdef double[::1] es = es_a, eo = eo_a, al = al_a
    cdef double dr1, dr0, dc1, dc0, q2, b3, q3
    cdef Py_ssize_t i
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        O[i, 0] = 0.5
        O[i, 1] = _logistic(es[i] * (0.5 * dr1 + 0.5 * dr0))
        q2 = _logistic(eo[i] * (0.5 * dc1 + 0.5 * dc0))
        O[i, 2] = _logistic(es[i] * (q2 * dr1 + (1.0 - q2) * dr0))
        b3 = _logistic(eo[i] * (0.5 * dr1 + 0.5 * dr0))
        q3 = _logistic(eo[i] * (b3 * dc1 + (1.0 - b3) * dc0))
        O[i, 3] = _logistic(es[i] * (q3 * dr1 + (1.0 - q3) * dr0))
    return out


def levelk_beliefs(R, C, eta_o, alpha):
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    eo_a, al_a = _as1d(eta_o, n), _as1d(alpha, n)
    out = np.empty((n, 4), dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2, O = out
    cdef double[::1] eo = eo_a, al = al_a
    cdef double dr1, dr0, dc1, dc0, b3
    cdef Py_ssize_t i
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        O[i, 0] = 0.5
        O[i, 1] = 0.5
        O[i, 2] = _logistic(eo[i] * (0.5 * dc1 + 0.5 * dc0))
        b3 = _logistic(eo[i] * (0.5 * dr1 + 0.5 * dr0))
        O[i, 3] = _logistic(eo[i] * (b3 * dc1 + (1.0 - b3) * dc0))
    return out


def levelk_all_grad(R, C, eta_s, eta_o, alpha):
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    es_a, eo_a, al_a = _as1d(eta_s, n), _as1d(eta_o, n), _as1d(alpha, n)
    P = np.empty((n, 4), dtype=np.float64)
    Des = np.zeros((n, 4), dtype=np.float64)
    Deo = np.zeros((n, 4), dtype=np.float64)
    Dda = np.zeros((n, 4), dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2, Pv = P, E1 = Des, E2 = Deo, E3 = Dda
    cdef double[::1] es = es_a, eo = eo_a, al = al_a
    cdef double dr1, dr0, dc1, dc0, ddr1, ddr0, ddc1, ddc0
    cdef double mr, dmr, mc, dmc, dr_q, p, sp, dp_dq
    cdef double q2, sq2, q2_deo, q2_da, b3, sb3, b3_deo, b3_da
    cdef double dc_b, q3, sq3, q3_db, q3_deo, q3_da
    cdef Py_ssize_t i
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        _dgaps(Rv, Cv, al[i], i, &ddr1, &ddr0, &ddc1, &ddc0)
        mr = 0.5 * dr1 + 0.5 * dr0
        dmr = 0.5 * ddr1 + 0.5 * ddr0
        mc = 0.5 * dc1 + 0.5 * dc0
        dmc = 0.5 * ddc1 + 0.5 * ddc0

        Pv[i, 0] = 0.5

        # k = 1: uniform belief
        p = _logistic(es[i] * mr)
        sp = p * (1.0 - p)
        Pv[i, 1] = p
        E1[i, 1] = sp * mr
        E3[i, 1] = sp * es[i] * dmr

        # k = 2
        q2 = _logistic(eo[i] * mc)
        sq2 = q2 * (1.0 - q2)
        q2_deo = sq2 * mc
        q2_da = sq2 * eo[i] * dmc
        dr_q = q2 * dr1 + (1.0 - q2) * dr0
        p = _logistic(es[i] * dr_q)
        sp = p * (1.0 - p)
        dp_dq = sp * es[i] * (dr1 - dr0)
        Pv[i, 2] = p
        E1[i, 2] = sp * dr_q
        E2[i, 2] = dp_dq * q2_deo
        E3[i, 2] = sp * es[i] * (q2 * ddr1 + (1.0 - q2) * ddr0) + dp_dq * q2_da

        # k = 3
        b3 = _logistic(eo[i] * mr)
        sb3 = b3 * (1.0 - b3)
        b3_deo = sb3 * mr
        b3_da = sb3 * eo[i] * dmr
        dc_b = b3 * dc1 + (1.0 - b3) * dc0
        q3 = _logistic(eo[i] * dc_b)
        sq3 = q3 * (1.0 - q3)
        q3_db = sq3 * eo[i] * (dc1 - dc0)
        q3_deo = sq3 * dc_b + q3_db * b3_deo
        q3_da = sq3 * eo[i] * (b3 * ddc1 + (1.0 - b3) * ddc0) + q3_db * b3_da
        dr_q = q3 * dr1 + (1.0 - q3) * dr0
        p = _logistic(es[i] * dr_q)
        sp = p * (1.0 - p)
        dp_dq = sp * es[i] * (dr1 - dr0)
        Pv[i, 3] = p
        E1[i, 3] = sp * dr_q
        E2[i, 3] = dp_dq * q3_deo
        E3[i, 3] = sp * es[i] * (q3 * ddr1 + (1.0 - q3) * ddr0) + dp_dq * q3_da
    return P, Des, Deo, Dda


cdef double _LADDER[8]
for _j in range(8):
    _LADDER[_j] = 2.0 ** (_j - 7)

DEF INNER_TOL = 1e-13
DEF MAX_POLISH = 80


cdef inline double _qre_h(double p, double es, double eo,
                          double dr1, double dr0, double dc1, double dc0,
                          double* hp, double* q_out) nogil:
    cdef double q = _logistic(eo * (p * dc1 + (1.0 - p) * dc0))
    cdef double f = _logistic(es * (q * dr1 + (1.0 - q) * dr0))
    cdef double dq = q * (1.0 - q) * eo * (dc1 - dc0)
    cdef double df = f * (1.0 - f) * es * (dr1 - dr0) * dq
    hp[0] = 1.0 - df
    q_out[0] = q
    return p - f


def qre_solve(R, C, eta_s, eta_o, alpha, tol=1e-10, max_iter=10000):
    """Principal-branch QRE per game; same continuation/Newton scheme as the
    reference backend with a per-game evaluation budget."""
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    es_a, eo_a, al_a = _as1d(eta_s, n), _as1d(eta_o, n), _as1d(alpha, n)
    p_out = np.empty(n, dtype=np.float64)
    q_out = np.empty(n, dtype=np.float64)
    r_out = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2
    cdef double[::1] es = es_a, eo = eo_a, al = al_a
    cdef double[::1] pv = p_out, qv = q_out, rv = r_out
    cdef double dr1, dr0, dc1, dc0, p, lo, hi, h, hp, q, newton, tes, teo, dxold
    cdef double tol_c = tol
    cdef int budget = int(max_iter)
    cdef int evals, level, it
    cdef Py_ssize_t i
    cdef bint exhausted = False
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        p = 0.5
        evals = 0
        for level in range(8):
            tes = _LADDER[level] * es[i]
            teo = _LADDER[level] * eo[i]
            lo = 0.0
            hi = 1.0
            dxold = 1.0
            for it in range(MAX_POLISH):
                h = _qre_h(p, tes, teo, dr1, dr0, dc1, dc0, &hp, &q)
                evals += 1
                if evals > budget:
                    exhausted = True
                    break
                if h <= 0.0:
                    if p > lo:
                        lo = p
                else:
                    if p < hi:
                        hi = p
                if fabs(h) <= INNER_TOL:
                    break
                if hp != 0.0:
                    newton = p - h / hp
                else:
                    newton = -1.0
                # Newton must land in the bracket AND shrink faster than
                # bisection would; without the step-size test a period-2
                # cycle can bounce inside the bracket without tightening it
                if (isfinite(newton) and newton > lo and newton < hi
                        and fabs(2.0 * h) <= fabs(dxold * hp)):
                    pass
                else:
                    newton = 0.5 * (lo + hi)
                dxold = fabs(newton - p)
                p = newton
            if exhausted:
                break
        h = _qre_h(p, es[i], eo[i], dr1, dr0, dc1, dc0, &hp, &q)
        pv[i] = p
        qv[i] = q
        rv[i] = fabs(h)
        if exhausted:
            raise NoConvergence(
                "QRE solver exhausted its evaluation budget",
                last=p_out[: i + 1].copy(),
                residual=float(rv[i]),
            )
    if np.any(r_out > tol_c):
        worst = int(np.argmax(r_out))
        raise NoConvergence(
            f"QRE residual {r_out[worst]:.3e} above tol {tol_c:.1e}",
            last=p_out.copy(),
            residual=float(r_out[worst]),
        )
    return p_out, q_out, r_out


def qre_unrolled(R, C, eta_s, eta_o, alpha, n_iter=50, damping=0.5):
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    es_a, eo_a, al_a = _as1d(eta_s, n), _as1d(eta_o, n), _as1d(alpha, n)
    p_out = np.empty(n, dtype=np.float64)
    q_out = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2
    cdef double[::1] es = es_a, eo = eo_a, al = al_a
    cdef double[::1] pv = p_out, qv = q_out
    cdef double dr1, dr0, dc1, dc0, p, q, fp, fq, d = damping
    cdef int iters = int(n_iter), t
    cdef Py_ssize_t i
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        p = 0.5
        q = 0.5
        for t in range(iters):
            fp = _logistic(es[i] * (q * dr1 + (1.0 - q) * dr0))
            fq = _logistic(eo[i] * (p * dc1 + (1.0 - p) * dc0))
            p = (1.0 - d) * p + d * fp
            q = (1.0 - d) * q + d * fq
        pv[i] = p
        qv[i] = q
    return p_out, q_out


def qre_unrolled_grad(R, C, eta_s, eta_o, alpha, n_iter=50, damping=0.5):
    R2, C2 = _as2d(R), _as2d(C)
    cdef Py_ssize_t n = R2.shape[0]
    es_a, eo_a, al_a = _as1d(eta_s, n), _as1d(eta_o, n), _as1d(alpha, n)
    p_out = np.empty(n, dtype=np.float64)
    pes_out = np.empty(n, dtype=np.float64)
    peo_out = np.empty(n, dtype=np.float64)
    pda_out = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] Rv = R2, Cv = C2
    cdef double[::1] es = es_a, eo = eo_a, al = al_a
    cdef double[::1] pv = p_out, e1 = pes_out, e2 = peo_out, e3 = pda_out
    cdef double dr1, dr0, dc1, dc0, ddr1, ddr0, ddc1, ddc0
    cdef double p, q, p_es, p_eo, p_da, q_es, q_eo, q_da
    cdef double dr_q, fp, sp, fp_q, fp_es, fp_eo, fp_da
    cdef double dc_p, fq, sq, fq_p, fq_es, fq_eo, fq_da
    cdef double d = damping
    cdef int iters = int(n_iter), t
    cdef Py_ssize_t i
    for i in range(n):
        _gaps(Rv, Cv, al[i], i, &dr1, &dr0, &dc1, &dc0)
        _dgaps(Rv, Cv, al[i], i, &ddr1, &ddr0, &ddc1, &ddc0)
        p = 0.5
        q = 0.5
        p_es = p_eo = p_da = q_es = q_eo = q_da = 0.0
        for t in range(iters):
            dr_q = q * dr1 + (1.0 - q) * dr0
            fp = _logistic(es[i] * dr_q)
            sp = fp * (1.0 - fp)
            fp_q = sp * es[i] * (dr1 - dr0)
            fp_es = sp * dr_q + fp_q * q_es
            fp_eo = fp_q * q_eo
            fp_da = sp * es[i] * (q * ddr1 + (1.0 - q) * ddr0) + fp_q * q_da

            dc_p = p * dc1 + (1.0 - p) * dc0
            fq = _logistic(eo[i] * dc_p)
            sq = fq * (1.0 - fq)
            fq_p = sq * eo[i] * (dc1 - dc0)
            fq_eo = sq * dc_p + fq_p * p_eo
            fq_es = fq_p * p_es
            fq_da = sq * eo[i] * (p * ddc1 + (1.0 - p) * ddc0) + fq_p * p_da

            p = (1.0 - d) * p + d * fp
            q = (1.0 - d) * q + d * fq
            p_es = (1.0 - d) * p_es + d * fp_es
            q_es = (1.0 - d) * q_es + d * fq_es
            p_eo = (1.0 - d) * p_eo + d * fp_eo
            q_eo = (1.0 - d) * q_eo + d * fq_eo
            p_da = (1.0 - d) * p_da + d * fp_da
            q_da = (1.0 - d) * q_da + d * fq_da
        pv[i] = p
        e1[i] = p_es
        e2[i] = p_eo
        e3[i] = p_da
    return p_out, pes_out, peo_out, pda_out
