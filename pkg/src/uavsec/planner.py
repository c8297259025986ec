"""Alternating optimization outer loop, fly-hover-fly baselines, plan assembly.

Schemes:

* ``proposed``     -- alternate power and trajectory SCA from a fly-hover-fly
                      start with constant power, then a final power polish.
* ``fhf_adaptive`` -- fly-hover-fly trajectory, power optimized once.
* ``fhf_constant`` -- fly-hover-fly trajectory, constant average power.

Every phase accepts only non-decreasing true objectives, so the convergence
trace of a plan is monotone end to end.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .power_opt import SCAConfig, optimize_power
from .scenario import PowerProfile, Scenario, Trajectory
from .trajectory_opt import optimize_trajectory

SCHEMES = ("proposed", "fhf_constant", "fhf_adaptive")


class InfeasibleHoverError(ValueError):
    """The hover points cannot be reached within the step budget."""


@dataclass(frozen=True)
class TraceRow:
    round: int
    phase: str               # "power" or "traj"
    inner_iter: int          # 0 is the phase-entry objective
    objective: float


@dataclass
class Plan:
    scheme: str
    trajectory: Trajectory
    power: PowerProfile
    r0: np.ndarray
    re_ub: np.ndarray
    rbar: np.ndarray
    rtilde: np.ndarray
    avg_rbar: float
    avg_rtilde: float
    trace: list = field(default_factory=list)
    outer_rounds: int = 0
    wall_ms: float = 0.0


def _leg(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """k waypoints marching from a to b in equal steps, excluding a."""
    if k == 0:
        return np.empty((0, 2))
    t = (np.arange(1, k + 1) / k)[:, None]
    return a + t * (b - a)


def fly_hover_fly(s: Scenario, hover_tx=None, hover_jam=None) -> Trajectory:
    """Max-speed flight to the hover point, longest possible hover, max-speed
    flight to the end point.  Hover defaults: transmitter above the GN,
    jammer above the eavesdropper estimate."""
    hovers = (np.asarray(hover_tx if hover_tx is not None else s.gn_location, float),
              np.asarray(hover_jam if hover_jam is not None else s.est_eve_location, float))
    paths = []
    for (start, end, vmax, hover, label) in (
        (s.start_tx, s.end_tx, s.max_step_tx, hovers[0], "tx"),
        (s.start_jam, s.end_jam, s.max_step_jam, hovers[1], "jam"),
    ):
        a = np.asarray(start, float)
        b = np.asarray(end, float)
        d_in = float(np.linalg.norm(hover - a))
        d_out = float(np.linalg.norm(b - hover))
        k_in = max(int(math.ceil(d_in / vmax - 1e-12)), 0)
        k_out = max(int(math.ceil(d_out / vmax - 1e-12)), 0)
        hover_steps = (s.num_slots + 1) - k_in - k_out
        if hover_steps < 0:
            raise InfeasibleHoverError(
                f"{label}: {k_in} + {k_out} legs exceed the {s.num_slots + 1} "
                f"available transitions")
        wp = np.vstack([a[None, :], _leg(a, hover, k_in),
                        np.tile(hover, (hover_steps, 1)), _leg(hover, b, k_out)])
        wp[0] = start
        wp[-1] = end
        paths.append(wp)
    return Trajectory(waypoints_tx=paths[0], waypoints_jam=paths[1])


def straight_line_trajectory(s: Scenario) -> Trajectory:
    """Uniform-speed straight path; feasible whenever the scenario validates."""
    paths = []
    for start, end in ((s.start_tx, s.end_tx), (s.start_jam, s.end_jam)):
        a = np.asarray(start, float)
        wp = np.vstack([a[None, :], _leg(a, np.asarray(end, float), s.num_slots + 1)])
        wp[0] = start
        wp[-1] = end
        paths.append(wp)
    return Trajectory(waypoints_tx=paths[0], waypoints_jam=paths[1])


def initial_trajectory(s: Scenario) -> Trajectory:
    """Fly-hover-fly when the step budget allows it, else the straight path."""
    try:
        return fly_hover_fly(s)
    except InfeasibleHoverError:
        return straight_line_trajectory(s)


def constant_power(s: Scenario) -> PowerProfile:
    """Both UAVs transmit at the average power budget in every slot."""
    return PowerProfile(p_tx=np.full(s.num_slots, s.p_ave),
                        p_jam=np.full(s.num_slots, s.p_ave))


def _trace_rows(round_no: int, phase: str, history) -> list:
    return [TraceRow(round=round_no, phase=phase, inner_iter=i, objective=v)
            for i, v in enumerate(history)]


def _finish(scheme, traj, pw, s, trace, rounds, t_start) -> Plan:
    r0, re, rbar, rtilde = channel.rates_profile(traj, pw, s)
    return Plan(scheme=scheme, trajectory=traj, power=pw,
                r0=r0, re_ub=re, rbar=rbar, rtilde=rtilde,
                avg_rbar=float(rbar.mean()), avg_rtilde=float(rtilde.mean()),
                trace=trace, outer_rounds=rounds,
                wall_ms=(time.perf_counter() - t_start) * 1e3)


def baseline(s: Scenario, scheme: str, cfg: SCAConfig | None = None) -> Plan:
    """Fly-hover-fly plan with constant or adaptive power allocation."""
    if scheme not in ("fhf_constant", "fhf_adaptive"):
        raise ValueError(f"unknown baseline scheme {scheme!r}")
    t0 = time.perf_counter()
    traj = initial_trajectory(s)
    pw = constant_power(s)
    trace = []
    rounds = 0
    if scheme == "fhf_adaptive":
        pw, hist = optimize_power(traj, pw, s, cfg)
        trace = _trace_rows(1, "power", hist)
        rounds = 1
    return _finish(scheme, traj, pw, s, trace, rounds, t0)


def optimize(s: Scenario, power_cfg: SCAConfig | None = None,
             traj_cfg: SCAConfig | None = None, max_rounds: int = 30,
             rel_tol: float = 1e-4) -> Plan:
    """Alternate power and trajectory optimization until the objective stalls.

    Power is optimized first (the initial fly-hover-fly trajectory is fixed
    and constant power is the cheapest thing to improve), then the
    trajectory; a closing power pass re-tunes the profile for the final
    paths so every shipped plan is power-optimal slot by slot.
    """
    t0 = time.perf_counter()
    traj = initial_trajectory(s)
    pw = constant_power(s)
    obj = channel.objective(traj, pw, s).avg_rbar
    trace = []
    rounds = 0
    for rnd in range(1, max_rounds + 1):
        pw, hist_p = optimize_power(traj, pw, s, power_cfg)
        trace += _trace_rows(rnd, "power", hist_p)
        traj, hist_t = optimize_trajectory(pw, traj, s, traj_cfg)
        trace += _trace_rows(rnd, "traj", hist_t)
        rounds = rnd
        gain = hist_t[-1] - obj
        obj = hist_t[-1]
        if gain < rel_tol * max(abs(obj), 1e-9):
            break
    pw, hist_p = optimize_power(traj, pw, s, power_cfg)
    trace += _trace_rows(rounds + 1, "power", hist_p)
    return _finish("proposed", traj, pw, s, trace, rounds, t0)
