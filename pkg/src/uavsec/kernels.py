"""Hot numeric kernels with a numba lane and a pure-numpy fallback lane.

The lane is picked at import time from the ``UAVSEC_BACKEND`` environment
variable: ``numba`` (require numba, fail if missing), ``numpy`` (force the
fallback), or ``auto`` (default: numba when importable).  Both lanes
implement identical arithmetic; ``benchmarks/bench_backends.py`` compares
them.

Kernels operate on per-slot float64 arrays:

* ``slot_rates_batch``      -- legitimate and worst-case eavesdropper rates
* ``power_objective_rows``  -- per-slot value/gradient/Hessian rows of the
                               negated power-allocation surrogate
* ``traj_objective_rows``   -- per-slot value/gradient/Hessian rows of the
                               negated trajectory surrogate
"""
from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("UAVSEC_BACKEND", "auto").lower()
if _env not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"UAVSEC_BACKEND must be auto|numba|numpy, got {_env!r}")

_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _slot_rates_numpy(q1, q2, p1, p2, w0x, w0y, wex, wey, eps, h1sq, h2sq, gamma0):
    g1 = gamma0 / ((q1[:, 0] - w0x) ** 2 + (q1[:, 1] - w0y) ** 2 + h1sq)
    g2 = gamma0 / ((q2[:, 0] - w0x) ** 2 + (q2[:, 1] - w0y) ** 2 + h2sq)
    de = np.sqrt((q1[:, 0] - wex) ** 2 + (q1[:, 1] - wey) ** 2) - eps
    de = np.maximum(de, 0.0)
    h1t = gamma0 / (de * de + h1sq)
    dj = np.sqrt((q2[:, 0] - wex) ** 2 + (q2[:, 1] - wey) ** 2) + eps
    h2t = gamma0 / (dj * dj + h2sq)
    r0 = np.log2(1.0 + g1 * p1 / (g2 * p2 + 1.0))
    re = np.log2(1.0 + h1t * p1 / (h2t * p2 + 1.0))
    return r0, re


def _power_rows_numpy(p1, p2, g1, g2, h2t, lin1, lin2, c0, w):
    n = p1.shape[0]
    s1 = 1.0 + g1 * p1 + g2 * p2
    s2 = 1.0 + h2t * p2
    vals = w * (-np.log2(s1) - np.log2(s2) + lin1 * p1 + lin2 * p2 + c0)
    grads = np.empty((n, 2))
    grads[:, 0] = w * (-g1 / (_LN2 * s1) + lin1)
    grads[:, 1] = w * (-g2 / (_LN2 * s1) - h2t / (_LN2 * s2) + lin2)
    hesses = np.empty((n, 2, 2))
    hesses[:, 0, 0] = w * g1 * g1 / (_LN2 * s1 * s1)
    hesses[:, 0, 1] = w * g1 * g2 / (_LN2 * s1 * s1)
    hesses[:, 1, 0] = hesses[:, 0, 1]
    hesses[:, 1, 1] = w * (g2 * g2 / (_LN2 * s1 * s1) + h2t * h2t / (_LN2 * s2 * s2))
    return vals, grads, hesses


def _traj_rows_numpy(xs, p1, p2, qa, qb, qc, c0, gamma0, w0x, w0y, wex, wey,
                     eps, deltasq, w):
    # xs columns: q1x, q1y, q2x, q2y, zeta, xi, tau.
    # qa/qb/qc are the negated linearization coefficients (>= 0).
    n = xs.shape[0]
    x1, y1 = xs[:, 0], xs[:, 1]
    x2, y2 = xs[:, 2], xs[:, 3]
    zeta, xi, tau = xs[:, 4], xs[:, 5], xs[:, 6]
    a1 = gamma0 * p2
    l1 = np.log2(1.0 + a1 / zeta)
    aw = gamma0 * p1
    bw = gamma0 * p2
    big_w = 1.0 + aw / xi + bw / tau
    l2 = np.log2(big_w)
    s1 = (x1 - w0x) ** 2 + (y1 - w0y) ** 2
    s2 = (x2 - w0x) ** 2 + (y2 - w0y) ** 2
    ux, uy = x2 - wex, y2 - wey
    r = np.sqrt(ux * ux + uy * uy + deltasq)
    s2e = ux * ux + uy * uy + 2.0 * eps * r + eps * eps
    vals = w * (l1 + l2 + qa * s2 + qb * s1 + qc * s2e + c0)

    grads = np.zeros((n, 7))
    grads[:, 0] = w * (2.0 * qb * (x1 - w0x))
    grads[:, 1] = w * (2.0 * qb * (y1 - w0y))
    gq2 = 2.0 * qa
    ge = 2.0 * qc * (1.0 + eps / r)
    grads[:, 2] = w * (gq2 * (x2 - w0x) + ge * ux)
    grads[:, 3] = w * (gq2 * (y2 - w0y) + ge * uy)
    grads[:, 4] = w * (-a1 / (_LN2 * (zeta * zeta + a1 * zeta)))
    grads[:, 5] = w * (-aw / (_LN2 * big_w * xi * xi))
    grads[:, 6] = w * (-bw / (_LN2 * big_w * tau * tau))

    hesses = np.zeros((n, 7, 7))
    hesses[:, 0, 0] = w * 2.0 * qb
    hesses[:, 1, 1] = w * 2.0 * qb
    r3 = r * r * r
    sxx = 2.0 + 2.0 * eps * (1.0 / r - ux * ux / r3)
    syy = 2.0 + 2.0 * eps * (1.0 / r - uy * uy / r3)
    sxy = -2.0 * eps * ux * uy / r3
    hesses[:, 2, 2] = w * (2.0 * qa + qc * sxx)
    hesses[:, 3, 3] = w * (2.0 * qa + qc * syy)
    hesses[:, 2, 3] = w * qc * sxy
    hesses[:, 3, 2] = hesses[:, 2, 3]
    dz = zeta * zeta + a1 * zeta
    hesses[:, 4, 4] = w * a1 * (2.0 * zeta + a1) / (_LN2 * dz * dz)
    hesses[:, 5, 5] = w * (aw / _LN2) * (2.0 / (big_w * xi ** 3)
                                         - aw / (big_w * big_w * xi ** 4))
    hesses[:, 6, 6] = w * (bw / _LN2) * (2.0 / (big_w * tau ** 3)
                                         - bw / (big_w * big_w * tau ** 4))
    hesses[:, 5, 6] = w * (-aw * bw / (_LN2 * big_w * big_w * xi * xi * tau * tau))
    hesses[:, 6, 5] = hesses[:, 5, 6]
    return vals, grads, hesses


# ---------------------------------------------------------------------------
# numba lane (scalar loops; same arithmetic as above)
# ---------------------------------------------------------------------------

def _build_numba_lane():
    from numba import njit

    @njit(cache=True)
    def slot_rates(q1, q2, p1, p2, w0x, w0y, wex, wey, eps, h1sq, h2sq, gamma0):
        n = p1.shape[0]
        r0 = np.empty(n)
        re = np.empty(n)
        for i in range(n):
            dx = q1[i, 0] - w0x
            dy = q1[i, 1] - w0y
            g1 = gamma0 / (dx * dx + dy * dy + h1sq)
            dx = q2[i, 0] - w0x
            dy = q2[i, 1] - w0y
            g2 = gamma0 / (dx * dx + dy * dy + h2sq)
            dx = q1[i, 0] - wex
            dy = q1[i, 1] - wey
            de = math.sqrt(dx * dx + dy * dy) - eps
            if de < 0.0:
                de = 0.0
            h1t = gamma0 / (de * de + h1sq)
            dx = q2[i, 0] - wex
            dy = q2[i, 1] - wey
            dj = math.sqrt(dx * dx + dy * dy) + eps
            h2t = gamma0 / (dj * dj + h2sq)
            r0[i] = math.log2(1.0 + g1 * p1[i] / (g2 * p2[i] + 1.0))
            re[i] = math.log2(1.0 + h1t * p1[i] / (h2t * p2[i] + 1.0))
        return r0, re

    @njit(cache=True)
    def power_rows(p1, p2, g1, g2, h2t, lin1, lin2, c0, w):
        n = p1.shape[0]
        vals = np.empty(n)
        grads = np.empty((n, 2))
        hesses = np.empty((n, 2, 2))
        ln2 = _LN2
        for i in range(n):
            s1 = 1.0 + g1[i] * p1[i] + g2[i] * p2[i]
            s2 = 1.0 + h2t[i] * p2[i]
            vals[i] = w * (-math.log2(s1) - math.log2(s2)
                           + lin1[i] * p1[i] + lin2[i] * p2[i] + c0[i])
            grads[i, 0] = w * (-g1[i] / (ln2 * s1) + lin1[i])
            grads[i, 1] = w * (-g2[i] / (ln2 * s1) - h2t[i] / (ln2 * s2) + lin2[i])
            h00 = g1[i] * g1[i] / (ln2 * s1 * s1)
            h01 = g1[i] * g2[i] / (ln2 * s1 * s1)
            h11 = g2[i] * g2[i] / (ln2 * s1 * s1) + h2t[i] * h2t[i] / (ln2 * s2 * s2)
            hesses[i, 0, 0] = w * h00
            hesses[i, 0, 1] = w * h01
            hesses[i, 1, 0] = w * h01
            hesses[i, 1, 1] = w * h11
        return vals, grads, hesses

    @njit(cache=True)
    def traj_rows(xs, p1, p2, qa, qb, qc, c0, gamma0, w0x, w0y, wex, wey,
                  eps, deltasq, w):
        n = xs.shape[0]
        vals = np.empty(n)
        grads = np.zeros((n, 7))
        hesses = np.zeros((n, 7, 7))
        ln2 = _LN2
        for i in range(n):
            x1 = xs[i, 0]
            y1 = xs[i, 1]
            x2 = xs[i, 2]
            y2 = xs[i, 3]
            zeta = xs[i, 4]
            xi = xs[i, 5]
            tau = xs[i, 6]
            a1 = gamma0 * p2[i]
            aw = gamma0 * p1[i]
            bw = gamma0 * p2[i]
            big_w = 1.0 + aw / xi + bw / tau
            s1 = (x1 - w0x) ** 2 + (y1 - w0y) ** 2
            s2 = (x2 - w0x) ** 2 + (y2 - w0y) ** 2
            ux = x2 - wex
            uy = y2 - wey
            r = math.sqrt(ux * ux + uy * uy + deltasq)
            s2e = ux * ux + uy * uy + 2.0 * eps * r + eps * eps
            vals[i] = w * (math.log2(1.0 + a1 / zeta) + math.log2(big_w)
                           + qa[i] * s2 + qb[i] * s1 + qc[i] * s2e + c0[i])
            grads[i, 0] = w * (2.0 * qb[i] * (x1 - w0x))
            grads[i, 1] = w * (2.0 * qb[i] * (y1 - w0y))
            ge = 2.0 * qc[i] * (1.0 + eps / r)
            grads[i, 2] = w * (2.0 * qa[i] * (x2 - w0x) + ge * ux)
            grads[i, 3] = w * (2.0 * qa[i] * (y2 - w0y) + ge * uy)
            grads[i, 4] = w * (-a1 / (ln2 * (zeta * zeta + a1 * zeta)))
            grads[i, 5] = w * (-aw / (ln2 * big_w * xi * xi))
            grads[i, 6] = w * (-bw / (ln2 * big_w * tau * tau))
            hesses[i, 0, 0] = w * 2.0 * qb[i]
            hesses[i, 1, 1] = w * 2.0 * qb[i]
            r3 = r * r * r
            sxx = 2.0 + 2.0 * eps * (1.0 / r - ux * ux / r3)
            syy = 2.0 + 2.0 * eps * (1.0 / r - uy * uy / r3)
            sxy = -2.0 * eps * ux * uy / r3
            hesses[i, 2, 2] = w * (2.0 * qa[i] + qc[i] * sxx)
            hesses[i, 3, 3] = w * (2.0 * qa[i] + qc[i] * syy)
            hesses[i, 2, 3] = w * qc[i] * sxy
            hesses[i, 3, 2] = hesses[i, 2, 3]
            dz = zeta * zeta + a1 * zeta
            hesses[i, 4, 4] = w * a1 * (2.0 * zeta + a1) / (ln2 * dz * dz)
            hesses[i, 5, 5] = w * (aw / ln2) * (2.0 / (big_w * xi ** 3)
                                                - aw / (big_w * big_w * xi ** 4))
            hesses[i, 6, 6] = w * (bw / ln2) * (2.0 / (big_w * tau ** 3)
                                                - bw / (big_w * big_w * tau ** 4))
            hesses[i, 5, 6] = w * (-aw * bw / (ln2 * big_w * big_w
                                               * xi * xi * tau * tau))
            hesses[i, 6, 5] = hesses[i, 5, 6]
        return vals, grads, hesses

    return slot_rates, power_rows, traj_rows


NUMPY_LANE = (_slot_rates_numpy, _power_rows_numpy, _traj_rows_numpy)
NUMBA_LANE = None

if _env in ("auto", "numba"):
    try:
        NUMBA_LANE = _build_numba_lane()
    except ImportError:
        if _env == "numba":
            raise RuntimeError("UAVSEC_BACKEND=numba but numba is not installed")

if NUMBA_LANE is not None:
    BACKEND = "numba"
    slot_rates_batch, power_objective_rows, traj_objective_rows = NUMBA_LANE
else:
    BACKEND = "numpy"
    slot_rates_batch, power_objective_rows, traj_objective_rows = NUMPY_LANE
