"""Free-space channel gains, worst-case eavesdropper bounds, and secrecy rates.

Single source of truth for every optimizer module: all gains are normalized
by the noise power (so the noise term is 1), positions are horizontal
coordinates in meters, and rates are in bps/Hz (log base 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .scenario import PowerProfile, Scenario, Trajectory


@dataclass(frozen=True)
class SlotRates:
    """Per-slot rate bundle: legitimate, worst-case eavesdropper, secrecy."""

    r0: float        # rate to the ground node
    re_ub: float     # upper bound on the eavesdropper rate over the error disk
    rbar: float      # r0 - re_ub (may be negative)
    rtilde: float    # max(rbar, 0)


@dataclass(frozen=True)
class AverageRates:
    """Mission-average secrecy rates: raw difference and clamped-at-zero."""

    avg_rbar: float
    avg_rtilde: float


def gain_to_gn(q, altitude: float, s: Scenario) -> float:
    """Normalized channel gain from a UAV at horizontal `q` to the GN."""
    d = np.asarray(q, dtype=float) - s.w0
    return s.gamma0 / (d @ d + altitude * altitude)


def worst_gain_to_eve_tx(q1, s: Scenario) -> float:
    """Largest transmitter-to-eavesdropper gain over the uncertainty disk.

    The horizontal distance term is clamped at zero: inside the disk the
    most favorable eavesdropper sits directly under the UAV.
    """
    d = np.asarray(q1, dtype=float) - s.we
    de = max(math.sqrt(d @ d) - s.eve_uncertainty, 0.0)
    return s.gamma0 / (de * de + s.altitude_tx ** 2)


def best_gain_to_eve_jam(q2, s: Scenario) -> float:
    """Smallest jammer-to-eavesdropper gain over the uncertainty disk."""
    d = np.asarray(q2, dtype=float) - s.we
    dj = math.sqrt(d @ d) + s.eve_uncertainty
    return s.gamma0 / (dj * dj + s.altitude_jam ** 2)


def attaining_eve_point_tx(q1, s: Scenario) -> np.ndarray:
    """Eavesdropper location in the disk that attains worst_gain_to_eve_tx.

    On the disk boundary along the UAV direction when the UAV is outside;
    the UAV's own horizontal position when inside; (eps, 0) offset by
    convention in the degenerate center case.
    """
    q1 = np.asarray(q1, dtype=float)
    u = q1 - s.we
    dist = math.sqrt(u @ u)
    eps = s.eve_uncertainty
    if dist <= eps:
        if dist == 0.0 and eps > 0.0:
            return s.we + np.array([eps, 0.0])
        return q1.copy()
    return s.we + u * (eps / dist)


def slot_rates(q1, q2, p1: float, p2: float, s: Scenario) -> SlotRates:
    """Rates for one slot at the given positions and powers."""
    g1 = gain_to_gn(q1, s.altitude_tx, s)
    g2 = gain_to_gn(q2, s.altitude_jam, s)
    h1t = worst_gain_to_eve_tx(q1, s)
    h2t = best_gain_to_eve_jam(q2, s)
    r0 = math.log2(1.0 + g1 * p1 / (g2 * p2 + 1.0))
    re = math.log2(1.0 + h1t * p1 / (h2t * p2 + 1.0))
    return SlotRates(r0=r0, re_ub=re, rbar=r0 - re, rtilde=max(r0 - re, 0.0))


def slot_gains(traj: Trajectory, s: Scenario):
    """Per-slot gain arrays (g1, g2, h1t, h2t) for slots 1..N."""
    q1 = np.asarray(traj.waypoints_tx, dtype=float)[1:-1]
    q2 = np.asarray(traj.waypoints_jam, dtype=float)[1:-1]
    g1 = s.gamma0 / (((q1 - s.w0) ** 2).sum(axis=1) + s.altitude_tx ** 2)
    g2 = s.gamma0 / (((q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2)
    de = np.maximum(np.linalg.norm(q1 - s.we, axis=1) - s.eve_uncertainty, 0.0)
    h1t = s.gamma0 / (de * de + s.altitude_tx ** 2)
    dj = np.linalg.norm(q2 - s.we, axis=1) + s.eve_uncertainty
    h2t = s.gamma0 / (dj * dj + s.altitude_jam ** 2)
    return g1, g2, h1t, h2t


def rates_profile(traj: Trajectory, pw: PowerProfile, s: Scenario):
    """Vectorized per-slot rates (r0, re_ub, rbar, rtilde) for slots 1..N."""
    q1 = np.ascontiguousarray(traj.waypoints_tx[1:-1], dtype=float)
    q2 = np.ascontiguousarray(traj.waypoints_jam[1:-1], dtype=float)
    p1 = np.ascontiguousarray(pw.p_tx, dtype=float)
    p2 = np.ascontiguousarray(pw.p_jam, dtype=float)
    r0, re = kernels.slot_rates_batch(
        q1, q2, p1, p2,
        s.gn_location[0], s.gn_location[1],
        s.est_eve_location[0], s.est_eve_location[1],
        s.eve_uncertainty, s.altitude_tx ** 2, s.altitude_jam ** 2, s.gamma0)
    rbar = r0 - re
    return r0, re, rbar, np.maximum(rbar, 0.0)


def objective(traj: Trajectory, pw: PowerProfile, s: Scenario) -> AverageRates:
    """Mission-average secrecy rates; avg_rbar is the optimization objective."""
    _, _, rbar, rtilde = rates_profile(traj, pw, s)
    return AverageRates(avg_rbar=float(rbar.mean()), avg_rtilde=float(rtilde.mean()))
