"""Pure-numpy kernel backend.

Vectorized implementations of the per-game numeric hot paths: CARA utilities,
the stable logistic, the level-k quantal-response chain (values and
forward-mode parameter partials), and the QRE fixed-point solver. The compiled
backend in ``_core.pyx`` mirrors these operation for operation.

Conventions: ``R`` is an (N,4) float array of row payoffs (a,b,c,d) at cells
(A,C),(A,D),(B,C),(B,D); ``C`` is (N,4) column payoffs (x,y,z,w) at the same
cells. ``eta_s``/``eta_o``/``alpha`` are (N,) arrays (callers broadcast
scalars). Grad outputs are partials with respect to eta_self, eta_other and
alpha per game.
"""

from __future__ import annotations

import numpy as np

from ..errors import NoConvergence

BACKEND_NAME = "reference"


def logistic(t):
    """Numerically stable logistic, elementwise; saturates to exact 0/1."""
    t_in = np.asarray(t, dtype=float)
    t1 = np.atleast_1d(t_in)
    out = np.empty_like(t1)
    pos = t1 >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t1[pos]))
    e = np.exp(t1[~pos])
    out[~pos] = e / (1.0 + e)
    return out.reshape(t_in.shape) if t_in.ndim else float(out[0])


def cara(x, alpha):
    """CARA utility (1 - e^(-alpha x)) / alpha; exactly x at alpha = 0."""
    x_in = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 0:
        out = x_in.copy() if alpha == 0.0 else -np.expm1(-alpha * x_in) / alpha
    else:
        alpha_b = np.broadcast_to(alpha, x_in.shape)
        safe = np.where(alpha_b == 0.0, 1.0, alpha_b)
        out = np.where(alpha_b == 0.0, x_in, -np.expm1(-safe * x_in) / safe)
    return out if x_in.ndim else float(out)


def cara_dalpha(x, alpha):
    """d/d(alpha) of the CARA utility, elementwise; -x^2/2 at alpha = 0.

    Uses (t e^-t + expm1(-t))/alpha^2 with t = alpha x, switching to the
    series -x^2/2 + a x^3/3 - a^2 x^4/8 + a^3 x^5/30 for small |t| where the
    direct form cancels.
    """
    x_in = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    x1 = np.atleast_1d(x_in)
    alpha_b = np.broadcast_to(alpha, x1.shape) if alpha.ndim else np.full_like(x1, alpha)
    t = alpha_b * x1
    small = np.abs(t) < 1e-3
    x2 = x1 * x1
    series = x2 * (-0.5 + t * (1.0 / 3.0 + t * (-0.125 + t / 30.0)))
    safe_a = np.where(small, 1.0, alpha_b)
    direct = (t * np.exp(-t) + np.expm1(-t)) / (safe_a * safe_a)
    out = np.where(small, series, direct)
    return out.reshape(x_in.shape) if x_in.ndim else float(out[0])


def _diffs(R, C, alpha):
    """Per-game utility gaps: EU differences are affine in the opponent mixture.

    DrEU(q) = q*dr1 + (1-q)*dr0 for the row player, DcEU(p) = p*dc1 + (1-p)*dc0
    for the column player.
    """
    UR = cara(R, alpha[:, None])
    UC = cara(C, alpha[:, None])
    dr1 = UR[:, 0] - UR[:, 2]
    dr0 = UR[:, 1] - UR[:, 3]
    dc1 = UC[:, 0] - UC[:, 1]
    dc0 = UC[:, 2] - UC[:, 3]
    return dr1, dr0, dc1, dc0


def _ddiffs(R, C, alpha):
    """alpha-partials of the four utility gaps."""
    dUR = cara_dalpha(R, alpha[:, None])
    dUC = cara_dalpha(C, alpha[:, None])
    ddr1 = dUR[:, 0] - dUR[:, 2]
    ddr0 = dUR[:, 1] - dUR[:, 3]
    ddc1 = dUC[:, 0] - dUC[:, 1]
    ddc0 = dUC[:, 2] - dUC[:, 3]
    return ddr1, ddr0, ddc1, ddc0


def levelk_all(R, C, eta_s, eta_o, alpha):
    """Level-k predictions p(first action) for k = 0..3, shape (N, 4).

    Level-0 plays 0.5. Level-k quantal-responds (precision eta_s) to a level-
    (k-1) opponent simulated throughout with precision eta_o and the same alpha.
    """
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    n = R.shape[0]
    p0 = np.full(n, 0.5)
    p1 = logistic(eta_s * (0.5 * dr1 + 0.5 * dr0))
    q2 = logistic(eta_o * (0.5 * dc1 + 0.5 * dc0))
    p2 = logistic(eta_s * (q2 * dr1 + (1.0 - q2) * dr0))
    b3 = logistic(eta_o * (0.5 * dr1 + 0.5 * dr0))
    q3 = logistic(eta_o * (b3 * dc1 + (1.0 - b3) * dc0))
    p3 = logistic(eta_s * (q3 * dr1 + (1.0 - q3) * dr0))
    return np.stack([p0, p1, p2, p3], axis=1)


def levelk_beliefs(R, C, eta_o, alpha):
    """Belief about the opponent's first action for k = 0..3, shape (N, 4).

    k=0 is defined as uniform for completeness; k=1 players hold the uniform
    belief; k>=2 beliefs are the simulated opponent's quantal response.
    """
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    n = R.shape[0]
    half = np.full(n, 0.5)
    q2 = logistic(eta_o * (0.5 * dc1 + 0.5 * dc0))
    b3 = logistic(eta_o * (0.5 * dr1 + 0.5 * dr0))
    q3 = logistic(eta_o * (b3 * dc1 + (1.0 - b3) * dc0))
    return np.stack([half, half, q2, q3], axis=1)


def levelk_all_grad(R, C, eta_s, eta_o, alpha):
    """Level-k predictions plus partials: (P, dP/deta_s, dP/deta_o, dP/dalpha).

    Forward-mode through the chain; every array is (N, 4) over k = 0..3.
    """
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    ddr1, ddr0, ddc1, ddc0 = _ddiffs(R, C, alpha)
    n = R.shape[0]
    zeros = np.zeros(n)

    mr = 0.5 * dr1 + 0.5 * dr0
    dmr = 0.5 * ddr1 + 0.5 * ddr0
    mc = 0.5 * dc1 + 0.5 * dc0
    dmc = 0.5 * ddc1 + 0.5 * ddc0

    def row_response(q, dq_deo, dq_da):
        """sigma(eta_s * DrEU(q)) and its partials given belief partials."""
        dr_q = q * dr1 + (1.0 - q) * dr0
        p = logistic(eta_s * dr_q)
        sp = p * (1.0 - p)
        dp_des = sp * dr_q
        dp_dq = sp * eta_s * (dr1 - dr0)
        dp_deo = dp_dq * dq_deo
        dp_da = sp * eta_s * (q * ddr1 + (1.0 - q) * ddr0) + dp_dq * dq_da
        return p, dp_des, dp_deo, dp_da

    # k = 0
    p0 = np.full(n, 0.5)
    g0 = (zeros, zeros, zeros)

    # k = 1: uniform belief
    half = np.full(n, 0.5)
    p1, p1_des, p1_deo, p1_da = row_response(half, zeros, zeros)

    # k = 2: opponent responds to uniform
    q2 = logistic(eta_o * mc)
    sq2 = q2 * (1.0 - q2)
    q2_deo = sq2 * mc
    q2_da = sq2 * eta_o * dmc
    p2, p2_des, p2_deo, p2_da = row_response(q2, q2_deo, q2_da)

    # k = 3: opponent responds to a simulated level-1 self
    b3 = logistic(eta_o * mr)
    sb3 = b3 * (1.0 - b3)
    b3_deo = sb3 * mr
    b3_da = sb3 * eta_o * dmr
    dc_b = b3 * dc1 + (1.0 - b3) * dc0
    q3 = logistic(eta_o * dc_b)
    sq3 = q3 * (1.0 - q3)
    q3_db = sq3 * eta_o * (dc1 - dc0)
    q3_deo = sq3 * dc_b + q3_db * b3_deo
    q3_da = sq3 * eta_o * (b3 * ddc1 + (1.0 - b3) * ddc0) + q3_db * b3_da
    p3, p3_des, p3_deo, p3_da = row_response(q3, q3_deo, q3_da)

    P = np.stack([p0, p1, p2, p3], axis=1)
    dPes = np.stack([g0[0], p1_des, p2_des, p3_des], axis=1)
    dPeo = np.stack([g0[1], p1_deo, p2_deo, p3_deo], axis=1)
    dPda = np.stack([g0[2], p1_da, p2_da, p3_da], axis=1)
    return P, dPes, dPeo, dPda


# --- QRE -----------------------------------------------------------------

_LADDER = tuple(2.0**-k for k in range(7, -1, -1))  # 1/128 .. 1
_INNER_TOL = 1e-13
_MAX_POLISH = 80


def _qre_h(p, es, eo, dr1, dr0, dc1, dc0):
    """Reduced fixed-point residual h(p) and its derivative.

    h(p) = p - sigma(es*DrEU(q(p))), q(p) = sigma(eo*DcEU(p)); h(0) <= 0 <= h(1)
    so a root always exists in [0, 1].
    """
    q = logistic(eo * (p * dc1 + (1.0 - p) * dc0))
    f = logistic(es * (q * dr1 + (1.0 - q) * dr0))
    dq = q * (1.0 - q) * eo * (dc1 - dc0)
    df = f * (1.0 - f) * es * (dr1 - dr0) * dq
    return p - f, 1.0 - df, q


def qre_solve(R, C, eta_s, eta_o, alpha, tol=1e-10, max_iter=10000):
    """Principal-branch QRE of each game: returns (p_A, q_C, residual).

    Continuation in a precision scale t (geometric ladder to 1) keeps the
    iterate on the branch connected to uniform play; each level runs
    bracket-safeguarded Newton on the reduced residual.
    """
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    n = R.shape[0]
    p = np.full(n, 0.5)
    evals = 0
    for t in _LADDER:
        es = t * eta_s
        eo = t * eta_o
        lo = np.zeros(n)
        hi = np.ones(n)
        done = np.zeros(n, dtype=bool)
        dxold = np.ones(n)
        for _ in range(_MAX_POLISH):
            h, hp, _ = _qre_h(p, es, eo, dr1, dr0, dc1, dc0)
            evals += 1
            if evals > max_iter:
                raise NoConvergence(
                    "QRE solver exhausted its evaluation budget",
                    last=p.copy(),
                    residual=float(np.max(np.abs(h))),
                )
            lo = np.where((h <= 0) & ~done, np.maximum(lo, p), lo)
            hi = np.where((h > 0) & ~done, np.minimum(hi, p), hi)
            done = done | (np.abs(h) <= _INNER_TOL)
            if done.all():
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = p - h / hp
            # Newton must land in the bracket AND shrink faster than bisection
            # would; without the step-size test a period-2 cycle can bounce
            # inside the bracket without ever tightening it
            bad = (
                ~np.isfinite(newton)
                | (newton <= lo)
                | (newton >= hi)
                | (np.abs(2.0 * h) > np.abs(dxold * hp))
            )
            step = np.where(bad, 0.5 * (lo + hi), newton)
            dxold = np.where(done, dxold, np.abs(step - p))
            p = np.where(done, p, step)
    h, _, q = _qre_h(p, eta_s, eta_o, dr1, dr0, dc1, dc0)
    residual = np.abs(h)
    if np.any(residual > tol):
        worst = int(np.argmax(residual))
        raise NoConvergence(
            f"QRE residual {residual[worst]:.3e} above tol {tol:.1e}",
            last=p.copy(),
            residual=float(residual[worst]),
        )
    return p, q, residual


def qre_unrolled(R, C, eta_s, eta_o, alpha, n_iter=50, damping=0.5):
    """Fixed-count damped fixed-point iteration from uniform play.

    This is the differentiable forward used by neural QRE variants; it is the
    model definition there, not an approximation of qre_solve.
    """
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    n = R.shape[0]
    p = np.full(n, 0.5)
    q = np.full(n, 0.5)
    for _ in range(n_iter):
        fp = logistic(eta_s * (q * dr1 + (1.0 - q) * dr0))
        fq = logistic(eta_o * (p * dc1 + (1.0 - p) * dc0))
        p = (1.0 - damping) * p + damping * fp
        q = (1.0 - damping) * q + damping * fq
    return p, q


def qre_unrolled_grad(R, C, eta_s, eta_o, alpha, n_iter=50, damping=0.5):
    """Unrolled QRE with forward-mode partials: (p, dp/deta_s, dp/deta_o, dp/dalpha)."""
    dr1, dr0, dc1, dc0 = _diffs(R, C, alpha)
    ddr1, ddr0, ddc1, ddc0 = _ddiffs(R, C, alpha)
    n = R.shape[0]
    p = np.full(n, 0.5)
    q = np.full(n, 0.5)
    p_es = np.zeros(n)
    p_eo = np.zeros(n)
    p_da = np.zeros(n)
    q_es = np.zeros(n)
    q_eo = np.zeros(n)
    q_da = np.zeros(n)
    d = damping
    for _ in range(n_iter):
        dr_q = q * dr1 + (1.0 - q) * dr0
        fp = logistic(eta_s * dr_q)
        sp = fp * (1.0 - fp)
        fp_q = sp * eta_s * (dr1 - dr0)
        fp_es = sp * dr_q + fp_q * q_es
        fp_eo = fp_q * q_eo
        fp_da = sp * eta_s * (q * ddr1 + (1.0 - q) * ddr0) + fp_q * q_da

        dc_p = p * dc1 + (1.0 - p) * dc0
        fq = logistic(eta_o * dc_p)
        sq = fq * (1.0 - fq)
        fq_p = sq * eta_o * (dc1 - dc0)
        fq_eo = sq * dc_p + fq_p * p_eo
        fq_es = fq_p * p_es
        fq_da = sq * eta_o * (p * ddc1 + (1.0 - p) * ddc0) + fq_p * p_da

        p = (1.0 - d) * p + d * fp
        q = (1.0 - d) * q + d * fq
        p_es, q_es = (1.0 - d) * p_es + d * fp_es, (1.0 - d) * q_es + d * fq_es
        p_eo, q_eo = (1.0 - d) * p_eo + d * fp_eo, (1.0 - d) * q_eo + d * fq_eo
        p_da, q_da = (1.0 - d) * p_da + d * fp_da, (1.0 - d) * q_da + d * fq_da
    return p, p_es, p_eo, p_da
