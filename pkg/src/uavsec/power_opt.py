"""Transmit/jamming power allocation for fixed trajectories via SCA.

The per-slot secrecy-rate difference is concave-minus-concave in the two
powers; each iteration keeps the concave logs exact, linearizes the convex
(negated-log) terms at the current point, and solves the resulting concave
program jointly over all slots under the average and peak power limits.
Iterates are accepted only when the true objective does not decrease, so the
recorded history is monotone by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, kernels, solver
from .scenario import PowerProfile, Scenario, Trajectory

_LN2 = math.log(2.0)


@dataclass
class SCAConfig:
    """Stop rule shared by both SCA loops: relative improvement or iteration cap."""

    rel_tol: float = 1e-4
    max_iters: int = 50
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-8


@dataclass
class PowerSubproblemState:
    """Expansion point and fixed per-slot gains for one SCA iteration."""

    p1: np.ndarray
    p2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    h1t: np.ndarray
    h2t: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)


class PowerOptimizationError(RuntimeError):
    """Subproblem solve failed; carries the last feasible profile."""

    def __init__(self, message, profile, history):
        super().__init__(message)
        self.profile = profile
        self.history = history


def rbar_power_form(p1, p2, g1, g2, h1t, h2t):
    """Per-slot secrecy-rate difference as four logs (noise normalized to 1).

    Algebraically identical to the legitimate-minus-eavesdropper rate form;
    accepts scalars or equal-length arrays.
    """
    return (np.log2(1.0 + g1 * p1 + g2 * p2) + np.log2(1.0 + h2t * p2)
            - np.log2(1.0 + g2 * p2) - np.log2(1.0 + h1t * p1 + h2t * p2))


def _expansion_coeffs(state: PowerSubproblemState):
    dm = 1.0 + state.h1t * state.p1 + state.h2t * state.p2
    em = 1.0 + state.g2 * state.p2
    lin1 = state.h1t / (_LN2 * dm)
    lin2 = state.g2 / (_LN2 * em) + state.h2t / (_LN2 * dm)
    c0 = np.log2(em) + np.log2(dm) - lin1 * state.p1 - lin2 * state.p2
    return lin1, lin2, c0


def surrogate_power(p1, p2, state: PowerSubproblemState):
    """Per-slot concave lower bound of rbar, tight at the expansion point."""
    lin1, lin2, c0 = _expansion_coeffs(state)
    return (np.log2(1.0 + state.g1 * p1 + state.g2 * p2)
            + np.log2(1.0 + state.h2t * p2)
            - lin1 * p1 - lin2 * p2 - c0)


def interior_power_start(p1, p2, p_ave, p_peak):
    """Pull a feasible profile strictly inside the power constraints.

    The floor keeps silenced slots far enough from the zero bound that the
    barrier stays well conditioned; its objective effect is negligible.
    """
    floor = p_peak * 1e-7
    out = []
    for p in (p1, p2):
        q = np.clip(np.asarray(p, dtype=float), floor, p_peak * (1.0 - 1e-9))
        cap = p_ave * (1.0 - 1e-8)
        if q.mean() > cap:
            q = q * (cap / q.mean())
        out.append(q)
    return out[0], out[1]


def build_power_subproblem(state: PowerSubproblemState, p_ave: float,
                           p_peak: float) -> solver.ConvexProblem:
    """Concave surrogate maximization as a ConvexProblem (negated, minimized).

    Variables are slot-interleaved: x = (p1[1], p2[1], p1[2], p2[2], ...).
    """
    n = state.p1.shape[0]
    lin1, lin2, c0 = _expansion_coeffs(state)
    g1 = np.ascontiguousarray(state.g1, dtype=float)
    g2 = np.ascontiguousarray(state.g2, dtype=float)
    h2t = np.ascontiguousarray(state.h2t, dtype=float)
    w = 1.0 / n
    obj_idx = np.stack([2 * np.arange(n), 2 * np.arange(n) + 1], axis=1)

    def obj_func(xs):
        return kernels.power_objective_rows(
            np.ascontiguousarray(xs[:, 0]), np.ascontiguousarray(xs[:, 1]),
            g1, g2, h2t, lin1, lin2, c0, w)

    avg_blocks = [
        solver.affine_block(idx=2 * np.arange(n)[None, :] + uav,
                            coeffs=np.full((1, n), w),
                            consts=np.array([-p_ave]),
                            name=f"avg_power_{'tx' if uav == 0 else 'jam'}")
        for uav in (0, 1)
    ]
    x0_p1, x0_p2 = interior_power_start(state.p1, state.p2, p_ave, p_peak)
    x0 = np.empty(2 * n)
    x0[0::2] = x0_p1
    x0[1::2] = x0_p2
    return solver.ConvexProblem(
        dim=2 * n,
        objective_blocks=[solver.TermBlock(obj_idx, obj_func, name="power_surrogate")],
        constraint_blocks=avg_blocks,
        lb=np.zeros(2 * n),
        ub=np.full(2 * n, p_peak),
        x0=x0,
        # Slot-diagonal 2x2 blocks; the average-power rows ride the solver's
        # low-rank Woodbury path.
        band_halfwidth=1,
        var_scale=np.full(2 * n, max(p_peak, 1.0)),
    )


def optimize_power_for_gains(g1, g2, h1t, h2t, p_ave: float, p_peak: float,
                             init_p1, init_p2, cfg: SCAConfig | None = None):
    """SCA loop on fixed gains; returns (p1, p2, history of true objectives)."""
    cfg = cfg or SCAConfig()
    g1, g2 = np.asarray(g1, dtype=float), np.asarray(g2, dtype=float)
    h1t, h2t = np.asarray(h1t, dtype=float), np.asarray(h2t, dtype=float)
    p1 = np.asarray(init_p1, dtype=float).copy()
    p2 = np.asarray(init_p2, dtype=float).copy()
    n = p1.shape[0]
    if p1.min() < 0 or p2.min() < 0 or max(p1.max(), p2.max()) > p_peak * (1 + 1e-9) \
            or max(p1.mean(), p2.mean()) > p_ave * (1 + 1e-9):
        raise ValueError("initial power profile violates the power constraints")

    obj = float(rbar_power_form(p1, p2, g1, g2, h1t, h2t).mean())
    history = [obj]
    mu0 = None
    for it in range(cfg.max_iters):
        state = PowerSubproblemState(p1=p1, p2=p2, g1=g1, g2=g2, h1t=h1t, h2t=h2t,
                                     iteration=it)
        problem = build_power_subproblem(state, p_ave, p_peak)
        report = solver.solve(problem, tol_kkt=cfg.tol_kkt, tol_feas=cfg.tol_feas,
                              mu0=mu0)
        if report.status != solver.CONVERGED:
            report = solver.solve_descent_only(problem, tol_kkt=cfg.tol_kkt,
                                               tol_feas=cfg.tol_feas)
        if report.status == solver.NUMERICAL_FAILURE:
            if it == 0:
                raise PowerOptimizationError(
                    f"power subproblem failed: {report.message}",
                    PowerProfile(p1, p2), history)
            break
        cand1 = report.x[0::2].copy()
        cand2 = report.x[1::2].copy()
        # Slots still leaking more than they deliver are silenced outright:
        # zero signal power makes the slot's rate difference exactly zero,
        # and a silenced slot spends no jamming power either (same rate,
        # frees average power, and re-expanding at the origin restores a
        # positive signal gradient wherever the legitimate link dominates).
        rb = rbar_power_form(cand1, cand2, g1, g2, h1t, h2t)
        neg = rb < 0.0
        cand1[neg] = 0.0
        cand2[neg] = 0.0
        cand_obj = float(rbar_power_form(cand1, cand2, g1, g2, h1t, h2t).mean())
        if cand_obj < obj:
            break
        p1, p2 = cand1, cand2
        history.append(cand_obj)
        gain = cand_obj - obj
        obj = cand_obj
        # re-expansions start from a near-optimal point; a short barrier
        # schedule is enough
        mu0 = 1e-4 * max(1.0, abs(obj))
        if gain < cfg.rel_tol * max(abs(obj), 1e-9):
            break
    return p1, p2, history


def optimize_power(traj: Trajectory, init: PowerProfile, s: Scenario,
                   cfg: SCAConfig | None = None):
    """Optimize both power profiles on a fixed trajectory.

    Returns (PowerProfile, history); history holds the true mission-average
    objective after the initial point and each accepted SCA iterate.
    """
    bad = init.check(s)
    if bad:
        raise ValueError("initial power profile invalid: " + "; ".join(bad))
    g1, g2, h1t, h2t = channel.slot_gains(traj, s)
    p1, p2, history = optimize_power_for_gains(
        g1, g2, h1t, h2t, s.p_ave, s.p_peak, init.p_tx, init.p_jam, cfg)
    return PowerProfile(p_tx=p1, p_jam=p2), history
