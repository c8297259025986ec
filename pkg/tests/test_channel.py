import math

import numpy as np
import pytest

from conftest import constant_profile, make_scenario, straight_trajectory
from uavsec import channel
from uavsec.scenario import reference_scenario


def eve_gain(q, we, altitude, gamma0):
    """Reference-model gain to a known eavesdropper position (test oracle)."""
    d = np.asarray(q, dtype=float) - np.asarray(we, dtype=float)
    return gamma0 / (d @ d + altitude ** 2)


def eve_rate(q1, q2, p1, p2, we, s):
    """Exact eavesdropper rate at a known position (test oracle)."""
    h1 = eve_gain(q1, we, s.altitude_tx, s.gamma0)
    h2 = eve_gain(q2, we, s.altitude_jam, s.gamma0)
    return math.log2(1.0 + h1 * p1 / (h2 * p2 + 1.0))


def disk_samples(s, n_radial=100, n_angular=1000):
    """Dense sample of the uncertainty disk, boundary included."""
    r = np.linspace(0.0, s.eve_uncertainty, n_radial)
    th = np.linspace(0.0, 2.0 * np.pi, n_angular, endpoint=False)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    return np.asarray(s.est_eve_location) + pts


def test_gain_to_gn_values():
    s = reference_scenario(200)
    assert channel.gain_to_gn((0.0, 0.0), 100.0, s) == pytest.approx(1e4, rel=1e-12)
    assert channel.gain_to_gn((100.0, 0.0), 110.0, s) == pytest.approx(1e8 / 22100,
                                                                       rel=1e-12)


def test_gain_decreases_with_distance():
    s = reference_scenario(200)
    g_near = channel.gain_to_gn((50.0, 0.0), 100.0, s)
    g_far = channel.gain_to_gn((120.0, 0.0), 100.0, s)
    assert g_near > g_far


def test_worst_tx_gain_closed_form_and_disk_oracle():
    s = reference_scenario(200)
    got = channel.worst_gain_to_eve_tx((300.0, 0.0), s)
    assert got == pytest.approx(1e8 / 18100, rel=1e-12)
    # brute force over 1e5 disk samples never exceeds the bound and gets close
    pts = disk_samples(s)
    gains = s.gamma0 / (((np.array([300.0, 0.0]) - pts) ** 2).sum(axis=1)
                        + s.altitude_tx ** 2)
    assert gains.max() <= got * (1 + 1e-12)
    assert got == pytest.approx(gains.max(), rel=2e-3)


def test_worst_tx_gain_inside_disk_clamps():
    s = reference_scenario(200)
    got = channel.worst_gain_to_eve_tx((205.0, 0.0), s)
    assert got == pytest.approx(1e4, rel=1e-12)
    pts = disk_samples(s)
    gains = s.gamma0 / (((np.array([205.0, 0.0]) - pts) ** 2).sum(axis=1)
                        + s.altitude_tx ** 2)
    assert gains.max() <= got * (1 + 1e-12)
    assert got == pytest.approx(gains.max(), rel=2e-3)


def test_worst_tx_gain_zero_radius():
    s = make_scenario(eve_uncertainty=0.0)
    q1 = (17.0, -4.0)
    assert channel.worst_gain_to_eve_tx(q1, s) == pytest.approx(
        eve_gain(q1, s.est_eve_location, s.altitude_tx, s.gamma0), rel=1e-14)


def test_best_jam_gain_closed_form_and_disk_oracle():
    s = reference_scenario(200)
    got = channel.best_gain_to_eve_jam((200.0, 0.0), s)
    assert got == pytest.approx(1e8 / 12200, rel=1e-12)
    pts = disk_samples(s)
    gains = s.gamma0 / (((np.array([200.0, 0.0]) - pts) ** 2).sum(axis=1)
                        + s.altitude_jam ** 2)
    assert gains.min() >= got * (1 - 1e-12)
    assert got == pytest.approx(gains.min(), rel=2e-3)


def test_jam_gain_dominated_everywhere(rng):
    s = reference_scenario(200)
    for _ in range(20):
        q2 = rng.uniform(-400, 400, 2)
        bound = channel.best_gain_to_eve_jam(q2, s)
        r = s.eve_uncertainty * np.sqrt(rng.uniform(0, 1, 500))
        th = rng.uniform(0, 2 * np.pi, 500)
        pts = s.we + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
        gains = s.gamma0 / (((q2 - pts) ** 2).sum(axis=1) + s.altitude_jam ** 2)
        assert gains.min() >= bound * (1 - 1e-12)


def test_attaining_point_boundary_and_interior():
    s = reference_scenario(200)
    np.testing.assert_allclose(channel.attaining_eve_point_tx((300.0, 0.0), s),
                               [210.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(channel.attaining_eve_point_tx((205.0, 0.0), s),
                               [205.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(channel.attaining_eve_point_tx((200.0, 0.0), s),
                               [210.0, 0.0], atol=1e-12)


def test_attaining_point_reproduces_worst_gain(rng):
    s = reference_scenario(200)
    for _ in range(50):
        q1 = rng.uniform(-500, 500, 2)
        we_star = channel.attaining_eve_point_tx(q1, s)
        assert np.linalg.norm(we_star - s.we) <= s.eve_uncertainty + 1e-9
        direct = eve_gain(q1, we_star, s.altitude_tx, s.gamma0)
        assert direct == pytest.approx(channel.worst_gain_to_eve_tx(q1, s),
                                       rel=1e-12)


def test_slot_rates_point_values():
    # transmitter above the GN with the eavesdropper estimated 1 km away
    s = make_scenario(est_eve_location=(1000.0, 0.0), eve_uncertainty=10.0)
    rates = channel.slot_rates((0.0, 0.0), (500.0, 500.0), 1.0, 0.0, s)
    assert rates.r0 == pytest.approx(math.log2(1.0 + 1e4), rel=1e-12)
    expected_re = math.log2(1.0 + 1e8 / ((1000.0 - 10.0) ** 2 + 1e4))
    assert rates.re_ub == pytest.approx(expected_re, rel=1e-12)
    assert rates.re_ub < rates.r0
    assert rates.rbar == pytest.approx(rates.r0 - rates.re_ub, rel=1e-12)
    assert rates.rtilde == rates.rbar


def test_equal_gain_geometry_zeroes_rbar(rng):
    # estimate on the GN with zero radius makes both links identical
    s = make_scenario(est_eve_location=(0.0, 0.0), eve_uncertainty=0.0)
    for _ in range(10):
        q1 = rng.uniform(-50, 50, 2)
        q2 = rng.uniform(-50, 50, 2)
        p1, p2 = rng.uniform(0, 4, 2)
        rates = channel.slot_rates(q1, q2, p1, p2, s)
        assert rates.rbar == pytest.approx(0.0, abs=1e-12)


def test_zero_signal_power():
    s = make_scenario()
    rates = channel.slot_rates((5.0, 5.0), (10.0, 0.0), 0.0, 1.0, s)
    assert rates.r0 == 0.0 and rates.re_ub == 0.0 and rates.rbar == 0.0
    assert rates.rtilde == 0.0


def test_objective_zero_power_and_single_slot():
    s = make_scenario(num_slots=1, start_tx=(-5.0, 20.0), end_tx=(5.0, 20.0),
                      start_jam=(-5.0, 20.0), end_jam=(5.0, 20.0))
    traj = straight_trajectory(s)
    zeros = constant_profile(s, p1=0.0, p2=0.0)
    avg = channel.objective(traj, zeros, s)
    assert avg.avg_rbar == 0.0 and avg.avg_rtilde == 0.0
    pw = constant_profile(s)
    rates = channel.slot_rates(traj.waypoints_tx[1], traj.waypoints_jam[1],
                               pw.p_tx[0], pw.p_jam[0], s)
    avg = channel.objective(traj, pw, s)
    assert avg.avg_rbar == pytest.approx(rates.rbar, rel=1e-12)
    assert avg.avg_rtilde == pytest.approx(rates.rtilde, rel=1e-12)


def test_clamped_average_dominates(rng):
    s = make_scenario()
    traj = straight_trajectory(s)
    for _ in range(10):
        pw = constant_profile(s, p1=rng.uniform(0, 4), p2=rng.uniform(0, 4))
        avg = channel.objective(traj, pw, s)
        assert avg.avg_rtilde >= avg.avg_rbar - 1e-15


def test_rates_profile_matches_scalar_slot_rates(rng):
    s = make_scenario()
    traj = straight_trajectory(s)
    traj.waypoints_tx[1:-1] += rng.uniform(-2, 2, (s.num_slots, 2))
    pw = constant_profile(s)
    pw.p_tx[:] = rng.uniform(0, 4, s.num_slots)
    pw.p_jam[:] = rng.uniform(0, 4, s.num_slots)
    r0, re, rbar, rtilde = channel.rates_profile(traj, pw, s)
    for n in range(s.num_slots):
        ref = channel.slot_rates(traj.waypoints_tx[n + 1], traj.waypoints_jam[n + 1],
                                 pw.p_tx[n], pw.p_jam[n], s)
        assert r0[n] == pytest.approx(ref.r0, rel=1e-12, abs=1e-14)
        assert re[n] == pytest.approx(ref.re_ub, rel=1e-12, abs=1e-14)
        assert rbar[n] == pytest.approx(ref.rbar, rel=1e-12, abs=1e-12)
        assert rtilde[n] == pytest.approx(ref.rtilde, rel=1e-12, abs=1e-12)


def test_upper_bound_sound_monte_carlo(rng):
    s = reference_scenario(200)
    for _ in range(2000):
        q1 = rng.uniform(-600, 600, 2)
        q2 = rng.uniform(-600, 600, 2)
        p1, p2 = rng.uniform(0, s.p_peak, 2)
        r = s.eve_uncertainty * math.sqrt(rng.uniform(0, 1))
        th = rng.uniform(0, 2 * math.pi)
        we = s.we + np.array([r * math.cos(th), r * math.sin(th)])
        bound = channel.slot_rates(q1, q2, p1, p2, s).re_ub
        assert eve_rate(q1, q2, p1, p2, we, s) <= bound + 1e-12


def test_zero_radius_collapses_bound_to_exact_rate(rng):
    s = make_scenario(eve_uncertainty=0.0)
    for _ in range(50):
        q1 = rng.uniform(-200, 200, 2)
        q2 = rng.uniform(-200, 200, 2)
        p1, p2 = rng.uniform(0, 4, 2)
        bound = channel.slot_rates(q1, q2, p1, p2, s).re_ub
        exact = eve_rate(q1, q2, p1, p2, s.est_eve_location, s)
        assert bound == pytest.approx(exact, rel=1e-12, abs=1e-14)
