import numpy as np
import pytest

from uavsec.scenario import PowerProfile, Scenario, Trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_scenario(**overrides) -> Scenario:
    """Small baseline instance: GN at origin, eavesdropper 120 m east."""
    fields = dict(
        gn_location=(0.0, 0.0),
        est_eve_location=(120.0, 0.0),
        eve_uncertainty=5.0,
        altitude_tx=100.0,
        altitude_jam=110.0,
        max_step_tx=10.0,
        max_step_jam=10.0,
        slot_duration=1.0,
        num_slots=8,
        p_ave=1.0,
        p_peak=4.0,
        gamma0=1e8,
        start_tx=(-30.0, 20.0),
        end_tx=(30.0, 20.0),
        start_jam=(-30.0, 20.0),
        end_jam=(30.0, 20.0),
    )
    fields.update(overrides)
    return Scenario(**fields)


def straight_waypoints(a, b, n_slots) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n_slots + 2)[:, None]
    return np.asarray(a, dtype=float) + t * (np.asarray(b, dtype=float)
                                             - np.asarray(a, dtype=float))


def straight_trajectory(s: Scenario) -> Trajectory:
    return Trajectory(
        waypoints_tx=straight_waypoints(s.start_tx, s.end_tx, s.num_slots),
        waypoints_jam=straight_waypoints(s.start_jam, s.end_jam, s.num_slots))


def constant_profile(s: Scenario, p1=None, p2=None) -> PowerProfile:
    return PowerProfile(
        p_tx=np.full(s.num_slots, s.p_ave if p1 is None else p1),
        p_jam=np.full(s.num_slots, s.p_ave if p2 is None else p2))
