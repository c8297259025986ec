"""UAV trajectory optimization for fixed powers via SCA.

The per-slot objective is rewritten with auxiliary squared-distance
variables (one per reciprocal gain term), whose defining inequalities have
convex right-hand sides; those and the two convex log terms are replaced by
first-order expansions at the current trajectory, yielding a concave
maximization over waypoints and auxiliaries, solved jointly for all slots.

Variables are slot-major, 7 per slot: (q1x, q1y, q2x, q2y, zeta, xi, tau),
where zeta tracks the jammer-to-GN squared distance, xi the transmitter-to-
eavesdropper worst-case squared distance, and tau the jammer-to-eavesdropper
best-case squared distance (all including the altitude term).  Slots couple
only through the per-step displacement limits, so the Hessian is banded.

Iterates are accepted only when the true (channel-model) objective does not
decrease, which keeps the recorded history monotone even in the corner
cases where the expansion point enters the eavesdropper uncertainty disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, kernels, solver
from .power_opt import SCAConfig
from .scenario import PowerProfile, Scenario, Trajectory

_LN2 = math.log(2.0)

#: Smoothing length (meters) for norms inside constraint/objective terms,
#: below every solver tolerance.
NORM_SMOOTHING = 1e-6

#: Relative relaxation of the auxiliary-variable floors inside the barrier
#: solver.  A slot pinned exactly between its floor and its linearized cap
#: (jammer parked on the eavesdropper estimate with zero step slack) keeps a
#: strict interior this way; an auxiliary slightly below its physical floor
#: only makes the surrogate rate smaller, never larger, so the worst-case
#: guarantee is unaffected.  Accepted iterates re-derive auxiliaries at their
#: exact equality values.
_AUX_FLOOR_RELAX = 1e-9


@dataclass
class TrajSubproblemState:
    """Expansion trajectory, fixed powers, and auxiliary variables."""

    q1: np.ndarray          # (N, 2) transmitter slots 1..N
    q2: np.ndarray          # (N, 2) jammer slots 1..N
    p1: np.ndarray
    p2: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    tau: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)


class TrajectoryOptimizationError(RuntimeError):
    """Subproblem solve failed; carries the last feasible trajectory."""

    def __init__(self, message, trajectory, history):
        super().__init__(message)
        self.trajectory = trajectory
        self.history = history


def _smoothed_norm(v, deltasq=NORM_SMOOTHING ** 2):
    return np.sqrt((v ** 2).sum(axis=-1) + deltasq)


def aux_equality(q1, q2, s: Scenario):
    """Auxiliary values that make the reformulated rate equal the true one.

    The transmitter-to-eavesdropper distance is clamped at the uncertainty
    radius, matching the channel model's worst-case gain.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    zeta = ((q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2
    de = np.maximum(np.linalg.norm(q1 - s.we, axis=1) - s.eve_uncertainty, 0.0)
    xi = de * de + s.altitude_tx ** 2
    dj = np.linalg.norm(q2 - s.we, axis=1) + s.eve_uncertainty
    tau = dj * dj + s.altitude_jam ** 2
    return zeta, xi, tau


def rhat(q1, q2, zeta, xi, tau, p1, p2, s: Scenario):
    """Per-slot objective of the auxiliary-variable reformulation.

    Equals the true per-slot rate difference when the auxiliaries sit at
    their equality values; monotonically increasing in each auxiliary.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    g0 = s.gamma0
    g1 = g0 / (((q1 - s.w0) ** 2).sum(axis=1) + s.altitude_tx ** 2)
    g2 = g0 / (((q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2)
    dj = np.linalg.norm(q2 - s.we, axis=1) + s.eve_uncertainty
    h2t = g0 / (dj * dj + s.altitude_jam ** 2)
    return (-np.log2(1.0 + g0 * p2 / zeta)
            - np.log2(1.0 + g0 * p1 / xi + g0 * p2 / tau)
            + np.log2(1.0 + h2t * p2)
            + np.log2(1.0 + g1 * p1 + g2 * p2))


def _local_geometry(q1m, q2m, s: Scenario):
    u1 = q1m - s.we                       # transmitter to eavesdropper estimate
    u2e = q2m - s.we                      # jammer to eavesdropper estimate
    u2g = q2m - s.w0                      # jammer to GN
    n2e = np.linalg.norm(u2e, axis=1)
    unit = np.where(n2e[:, None] > 1e-12, u2e / np.maximum(n2e, 1e-12)[:, None],
                    np.array([1.0, 0.0]))
    return u1, u2e, u2g, n2e, unit


def linearized_constraints(q1, q2, zeta, xi, tau, q1m, q2m, s: Scenario):
    """Residuals of the three per-slot linearized constraints (feasible <= 0).

    Satisfying all three implies the original auxiliary-variable
    inequalities; each is tight at the expansion point with auxiliaries at
    equality.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    q1m = np.atleast_2d(np.asarray(q1m, dtype=float))
    q2m = np.atleast_2d(np.asarray(q2m, dtype=float))
    eps = s.eve_uncertainty
    u1, u2e, u2g, n2e, unit = _local_geometry(q1m, q2m, s)
    s2m = (u2g ** 2).sum(axis=1)
    con_gn = (zeta - s2m - 2.0 * (u2g * (q2 - q2m)).sum(axis=1)
              - s.altitude_jam ** 2)
    s1em = (u1 ** 2).sum(axis=1)
    con_eve_tx = (xi - s1em - 2.0 * (u1 * (q1 - q1m)).sum(axis=1)
                  + 2.0 * eps * _smoothed_norm(q1 - s.we)
                  - eps * eps - s.altitude_tx ** 2)
    vm = u2e + eps * unit
    s2em = (u2e ** 2).sum(axis=1)
    con_eve_jam = (tau - eps * eps - s.altitude_jam ** 2 - s2em
                   - 2.0 * (vm * (q2 - q2m)).sum(axis=1) - 2.0 * eps * n2e)
    return {"gn": con_gn, "eve_tx": con_eve_tx, "eve_jam": con_eve_jam}


def _surrogate_coeffs(state: TrajSubproblemState, s: Scenario):
    """Negated linearization coefficients (>= 0) and per-slot constants."""
    g0 = s.gamma0
    g1m = g0 / (((state.q1 - s.w0) ** 2).sum(axis=1) + s.altitude_tx ** 2)
    g2m = g0 / (((state.q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2)
    dj = np.linalg.norm(state.q2 - s.we, axis=1) + s.eve_uncertainty
    h2tm = g0 / (dj * dj + s.altitude_jam ** 2)
    den = 1.0 + g1m * state.p1 + g2m * state.p2
    qa = g2m * g2m * state.p2 / (_LN2 * g0 * den)
    qb = g1m * g1m * state.p1 / (_LN2 * g0 * den)
    qc = h2tm * h2tm * state.p2 / (_LN2 * g0 * (1.0 + h2tm * state.p2))
    d = np.log2(1.0 + h2tm * state.p2) + np.log2(den)
    s2m = ((state.q2 - s.w0) ** 2).sum(axis=1)
    s1m = ((state.q1 - s.w0) ** 2).sum(axis=1)
    u2e = state.q2 - s.we
    sm_full = ((u2e ** 2).sum(axis=1)
               + 2.0 * s.eve_uncertainty * _smoothed_norm(u2e)
               + s.eve_uncertainty ** 2)
    c0 = -(qa * s2m + qb * s1m + qc * sm_full) - d
    return qa, qb, qc, c0


def surrogate_rhat(q1, q2, zeta, xi, tau, state: TrajSubproblemState, s: Scenario):
    """Concave per-slot lower bound of rhat, tight at the expansion point."""
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    qa, qb, qc, c0 = _surrogate_coeffs(state, s)
    g0 = s.gamma0
    l1 = np.log2(1.0 + g0 * state.p2 / zeta)
    l2 = np.log2(1.0 + g0 * state.p1 / xi + g0 * state.p2 / tau)
    s2 = ((q2 - s.w0) ** 2).sum(axis=1)
    s1 = ((q1 - s.w0) ** 2).sum(axis=1)
    u2e = q2 - s.we
    s_full = ((u2e ** 2).sum(axis=1)
              + 2.0 * s.eve_uncertainty * _smoothed_norm(u2e)
              + s.eve_uncertainty ** 2)
    return -(l1 + l2 + qa * s2 + qb * s1 + qc * s_full + c0)


def _nudge_budget(qm, start, end, vmax):
    """How far each slot may move without threatening the step limits."""
    pts = np.vstack([np.asarray(start, dtype=float), qm, np.asarray(end, dtype=float)])
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    slack = np.minimum(vmax - steps[:-1], vmax - steps[1:])
    return np.clip(0.5 * slack, 0.0, None)


def _desingularize(q1, q2, s: Scenario, off: float = 1e-2):
    """Shift degenerate expansion slots so every auxiliary has a strict interior.

    A jammer slot exactly on the eavesdropper estimate (the fly-hover-fly
    hover point) or on the GN, and a transmitter slot exactly on the
    uncertainty circle, pin an auxiliary variable between its floor and its
    linearized cap.  A sub-centimeter shift of the expansion point, budgeted
    against the neighboring step slack, opens the gap; the true objective of
    accepted iterates is unaffected because acceptance is rechecked against
    the channel model.
    """
    q1 = q1.copy()
    q2 = q2.copy()
    eps = s.eve_uncertainty
    budget1 = _nudge_budget(q1, s.start_tx, s.end_tx, s.max_step_tx)
    budget2 = _nudge_budget(q2, s.start_jam, s.end_jam, s.max_step_jam)

    def push_off(q, center, radius, budget):
        u = q - center
        dist = np.linalg.norm(u, axis=1)
        bad = (np.abs(dist - radius) < off) & (budget > 1e-4)
        if bad.any():
            unit = np.where(dist[:, None] > 1e-12,
                            u / np.maximum(dist, 1e-12)[:, None],
                            np.array([1.0, 0.0]))
            shift = radius + np.minimum(off, budget)
            q[bad] = center + unit[bad] * shift[bad, None]
        return q

    q2 = push_off(q2, s.we, 0.0, budget2)
    q2 = push_off(q2, s.w0, 0.0, budget2)
    q1 = push_off(q1, s.we, eps, budget1)
    if eps == 0.0:
        q1 = push_off(q1, s.we, 0.0, budget1)
    return q1, q2


def interior_aux_start(q1m, q2m, s: Scenario):
    """Auxiliaries strictly inside the feasible slab for the barrier start.

    Equality values are backed off multiplicatively toward the lower floors;
    a midpoint fallback covers the degenerate zero-gap geometries.
    """
    zeta_eq, xi_eq, tau_eq = aux_equality(q1m, q2m, s)
    eps = s.eve_uncertainty
    # The linearized residuals are affine in the auxiliaries with unit
    # coefficient, so their value at aux = 0 is minus the per-slot cap.
    residual = linearized_constraints(q1m, q2m, 0.0 * zeta_eq, 0.0 * xi_eq,
                                      0.0 * tau_eq, q1m, q2m, s)
    caps = {"zeta": -residual["gn"], "xi": -residual["eve_tx"],
            "tau": -residual["eve_jam"]}
    floors = {"zeta": s.altitude_jam ** 2, "xi": s.altitude_tx ** 2,
              "tau": s.altitude_jam ** 2 + eps * eps}
    out = {}
    for name, eq in (("zeta", zeta_eq), ("xi", xi_eq), ("tau", tau_eq)):
        lo = floors[name] * (1.0 - _AUX_FLOOR_RELAX)
        hi = caps[name]
        v = lo + (np.minimum(eq, hi) - lo) * (1.0 - 1e-8)
        margin = 1e-12 * np.maximum(hi, 1.0)
        squeeze = (v - lo < margin) | (hi - v < margin)
        v = np.where(squeeze, lo + 0.5 * (hi - lo), v)
        out[name] = v
    return out["zeta"], out["xi"], out["tau"]


def build_trajectory_subproblem(state: TrajSubproblemState, s: Scenario
                                ) -> solver.ConvexProblem:
    """Assemble the banded convex subproblem at the given expansion point."""
    n = state.q1.shape[0]
    dim = 7 * n
    base = 7 * np.arange(n)
    eps = s.eve_uncertainty
    deltasq = NORM_SMOOTHING ** 2
    qa, qb, qc, c0 = _surrogate_coeffs(state, s)
    p1 = np.ascontiguousarray(state.p1, dtype=float)
    p2 = np.ascontiguousarray(state.p2, dtype=float)
    w = 1.0 / n

    obj_idx = base[:, None] + np.arange(7)[None, :]
    g0 = s.gamma0
    w0x, w0y = s.gn_location
    wex, wey = s.est_eve_location

    def obj_func(xs):
        return kernels.traj_objective_rows(
            np.ascontiguousarray(xs), p1, p2, qa, qb, qc, c0,
            g0, w0x, w0y, wex, wey, eps, deltasq, w)

    u1, u2e, u2g, n2e, unit = _local_geometry(state.q1, state.q2, s)

    # (gn) zeta <= tangent of ||q2 - w0||^2 + H2^2
    s2m = (u2g ** 2).sum(axis=1)
    gn_idx = np.stack([base + 2, base + 3, base + 4], axis=1)
    gn_coef = np.stack([-2.0 * u2g[:, 0], -2.0 * u2g[:, 1], np.ones(n)], axis=1)
    gn_const = (2.0 * (u2g * state.q2).sum(axis=1) - s2m - s.altitude_jam ** 2)

    # (eve_jam) tau <= tangent of (||q2 - we|| + eps)^2 + H2^2
    vm = u2e + eps * unit
    s2em = (u2e ** 2).sum(axis=1)
    ej_idx = np.stack([base + 2, base + 3, base + 6], axis=1)
    ej_coef = np.stack([-2.0 * vm[:, 0], -2.0 * vm[:, 1], np.ones(n)], axis=1)
    ej_const = (2.0 * (vm * state.q2).sum(axis=1) - s2em - 2.0 * eps * n2e
                - eps * eps - s.altitude_jam ** 2)

    # (eve_tx) xi - tangent of ||q1 - we||^2 + 2 eps ||q1 - we|| <= eps^2 + H1^2
    s1em = (u1 ** 2).sum(axis=1)
    et_idx = np.stack([base + 0, base + 1, base + 5], axis=1)
    et_aff = np.stack([-2.0 * u1[:, 0], -2.0 * u1[:, 1], np.ones(n)], axis=1)
    et_const = (2.0 * (u1 * state.q1).sum(axis=1) - s1em
                - eps * eps - s.altitude_tx ** 2)

    def et_func(xs):
        q = xs[:, :2]
        u = q - s.we
        r = np.sqrt((u ** 2).sum(axis=1) + deltasq)
        vals = (xs * et_aff).sum(axis=1) + et_const + 2.0 * eps * r
        grads = et_aff.copy()
        grads[:, 0] += 2.0 * eps * u[:, 0] / r
        grads[:, 1] += 2.0 * eps * u[:, 1] / r
        hesses = np.zeros((xs.shape[0], 3, 3))
        r3 = r ** 3
        hesses[:, 0, 0] = 2.0 * eps * (1.0 / r - u[:, 0] ** 2 / r3)
        hesses[:, 1, 1] = 2.0 * eps * (1.0 / r - u[:, 1] ** 2 / r3)
        hesses[:, 0, 1] = hesses[:, 1, 0] = -2.0 * eps * u[:, 0] * u[:, 1] / r3
        return vals, grads, hesses

    blocks = [
        solver.affine_block(gn_idx, gn_coef, gn_const, name="lin_gn"),
        solver.TermBlock(idx=et_idx, func=et_func, name="lin_eve_tx"),
        solver.affine_block(ej_idx, ej_coef, ej_const, name="lin_eve_jam"),
    ]
    blocks += _step_blocks(state.q1, base + 0, s.start_tx, s.end_tx,
                           s.max_step_tx, "tx")
    blocks += _step_blocks(state.q2, base + 2, s.start_jam, s.end_jam,
                           s.max_step_jam, "jam")

    lb = np.full(dim, -np.inf)
    lb[base + 4] = s.altitude_jam ** 2 * (1.0 - _AUX_FLOOR_RELAX)
    lb[base + 5] = s.altitude_tx ** 2 * (1.0 - _AUX_FLOOR_RELAX)
    lb[base + 6] = (s.altitude_jam ** 2 + eps * eps) * (1.0 - _AUX_FLOOR_RELAX)

    zeta0, xi0, tau0 = interior_aux_start(state.q1, state.q2, s)
    x0 = np.empty(dim)
    x0[base + 0] = state.q1[:, 0]
    x0[base + 1] = state.q1[:, 1]
    x0[base + 2] = state.q2[:, 0]
    x0[base + 3] = state.q2[:, 1]
    x0[base + 4] = zeta0
    x0[base + 5] = xi0
    x0[base + 6] = tau0

    return solver.ConvexProblem(
        dim=dim,
        objective_blocks=[solver.TermBlock(obj_idx, obj_func, name="traj_surrogate")],
        constraint_blocks=blocks,
        lb=lb,
        x0=x0,
        band_halfwidth=8,
        var_scale=np.maximum(np.abs(x0), 10.0),
    )


def _step_blocks(qm, xcols, start, end, vmax, label):
    """Squared-step constraints with a strictness bump for boundary starts."""
    n = qm.shape[0]
    pts = np.vstack([np.asarray(start, dtype=float), qm, np.asarray(end, dtype=float)])
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    caps = np.maximum(vmax * vmax, (steps * steps) * (1.0 + 1e-12))

    blocks = []
    first = np.asarray(start, dtype=float)
    last = np.asarray(end, dtype=float)

    def make_anchor(anchor, cap):
        def func(xs):
            d = xs - anchor
            vals = (d ** 2).sum(axis=1) - cap
            hess = np.tile(2.0 * np.eye(2), (xs.shape[0], 1, 1))
            return vals, 2.0 * d, hess
        return func

    blocks.append(solver.TermBlock(
        np.array([[xcols[0], xcols[0] + 1]]), make_anchor(first, caps[0]),
        name=f"step0_{label}"))
    blocks.append(solver.TermBlock(
        np.array([[xcols[-1], xcols[-1] + 1]]), make_anchor(last, caps[n]),
        name=f"stepN_{label}"))
    if n > 1:
        idx = np.stack([xcols[:-1], xcols[:-1] + 1, xcols[1:], xcols[1:] + 1], axis=1)
        mid_caps = caps[1:n].copy()
        hess_const = np.array([[2.0, 0.0, -2.0, 0.0],
                               [0.0, 2.0, 0.0, -2.0],
                               [-2.0, 0.0, 2.0, 0.0],
                               [0.0, -2.0, 0.0, 2.0]])

        def mid_func(xs):
            dx = xs[:, 2] - xs[:, 0]
            dy = xs[:, 3] - xs[:, 1]
            vals = dx * dx + dy * dy - mid_caps
            grads = np.stack([-2.0 * dx, -2.0 * dy, 2.0 * dx, 2.0 * dy], axis=1)
            hess = np.tile(hess_const, (xs.shape[0], 1, 1))
            return vals, grads, hess

        blocks.append(solver.TermBlock(idx, mid_func, name=f"steps_{label}"))
    return blocks


def optimize_trajectory(pw: PowerProfile, init: Trajectory, s: Scenario,
                        cfg: SCAConfig | None = None):
    """Optimize both UAV paths for fixed powers.

    Returns (Trajectory, history); history holds the true mission-average
    objective after the initial point and each accepted SCA iterate.
    Endpoints are never variables and are copied through bit-identically.
    """
    cfg = cfg or SCAConfig()
    bad = init.check(s)
    if bad:
        raise ValueError("initial trajectory invalid: " + "; ".join(bad))
    q1 = np.asarray(init.waypoints_tx, dtype=float)[1:-1].copy()
    q2 = np.asarray(init.waypoints_jam, dtype=float)[1:-1].copy()
    p1 = np.asarray(pw.p_tx, dtype=float)
    p2 = np.asarray(pw.p_jam, dtype=float)
    traj = _assemble_trajectory(q1, q2, s)
    obj = channel.objective(traj, pw, s).avg_rbar
    history = [obj]
    mu0 = None
    for it in range(cfg.max_iters):
        q1e, q2e = _desingularize(q1, q2, s)
        zeta, xi, tau = aux_equality(q1e, q2e, s)
        state = TrajSubproblemState(q1=q1e, q2=q2e, p1=p1, p2=p2,
                                    zeta=zeta, xi=xi, tau=tau, iteration=it)
        problem = build_trajectory_subproblem(state, s)
        report = solver.solve(problem, tol_kkt=cfg.tol_kkt, tol_feas=cfg.tol_feas,
                              mu0=mu0)
        if report.status != solver.CONVERGED:
            report = solver.solve_descent_only(problem, tol_kkt=cfg.tol_kkt,
                                               tol_feas=cfg.tol_feas)
        if report.status == solver.NUMERICAL_FAILURE:
            if it == 0:
                raise TrajectoryOptimizationError(
                    f"trajectory subproblem failed: {report.message}", traj, history)
            break
        base = 7 * np.arange(q1.shape[0])
        cand1 = np.stack([report.x[base + 0], report.x[base + 1]], axis=1)
        cand2 = np.stack([report.x[base + 2], report.x[base + 3]], axis=1)
        cand_traj = _assemble_trajectory(cand1, cand2, s)
        cand_obj = channel.objective(cand_traj, pw, s).avg_rbar
        if cand_obj < obj:
            break
        q1, q2, traj = cand1, cand2, cand_traj
        history.append(cand_obj)
        gain = cand_obj - obj
        obj = cand_obj
        # re-expansions start from a near-optimal point; a short barrier
        # schedule is enough
        mu0 = 1e-4 * max(1.0, abs(obj))
        if gain < cfg.rel_tol * max(abs(obj), 1e-9):
            break
    return traj, history


def _assemble_trajectory(q1, q2, s: Scenario) -> Trajectory:
    n = q1.shape[0]
    wp1 = np.empty((n + 2, 2))
    wp2 = np.empty((n + 2, 2))
    wp1[0] = s.start_tx
    wp1[1:-1] = q1
    wp1[-1] = s.end_tx
    wp2[0] = s.start_jam
    wp2[1:-1] = q2
    wp2[-1] = s.end_jam
    return Trajectory(waypoints_tx=wp1, waypoints_jam=wp2)
