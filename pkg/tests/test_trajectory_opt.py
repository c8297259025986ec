import numpy as np
import pytest

from conftest import constant_profile, make_scenario, straight_trajectory
from uavsec import channel, solver, trajectory_opt as topt
from uavsec.scenario import PowerProfile


def random_state(rng, s, spread=3.0):
    n = s.num_slots
    traj = straight_trajectory(s)
    q1 = traj.waypoints_tx[1:-1] + rng.uniform(-spread, spread, (n, 2))
    q2 = traj.waypoints_jam[1:-1] + rng.uniform(-spread, spread, (n, 2))
    zeta, xi, tau = topt.aux_equality(q1, q2, s)
    return topt.TrajSubproblemState(
        q1=q1, q2=q2, p1=rng.uniform(0.1, 3.0, n), p2=rng.uniform(0.1, 3.0, n),
        zeta=zeta, xi=xi, tau=tau)


def test_rhat_equals_true_rate_at_aux_equality(rng):
    s = make_scenario()
    st = random_state(rng, s)
    got = topt.rhat(st.q1, st.q2, st.zeta, st.xi, st.tau, st.p1, st.p2, s)
    traj = topt._assemble_trajectory(st.q1, st.q2, s)
    _, _, want, _ = channel.rates_profile(traj, PowerProfile(st.p1, st.p2), s)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_rhat_monotone_in_aux(rng):
    s = make_scenario()
    st = random_state(rng, s)
    base = topt.rhat(st.q1, st.q2, st.zeta, st.xi, st.tau, st.p1, st.p2, s)
    up = topt.rhat(st.q1, st.q2, st.zeta * 1.05, st.xi, st.tau, st.p1, st.p2, s)
    assert (up > base).all()


def test_rhat_zero_power():
    s = make_scenario()
    n = s.num_slots
    traj = straight_trajectory(s)
    zeta, xi, tau = topt.aux_equality(traj.waypoints_tx[1:-1],
                                      traj.waypoints_jam[1:-1], s)
    vals = topt.rhat(traj.waypoints_tx[1:-1], traj.waypoints_jam[1:-1],
                     zeta, xi, tau, np.zeros(n), np.zeros(n), s)
    np.testing.assert_allclose(vals, 0.0, atol=1e-14)


def test_linearized_constraints_tight_at_expansion(rng):
    s = make_scenario()
    st = random_state(rng, s)
    res = topt.linearized_constraints(st.q1, st.q2, st.zeta, st.xi, st.tau,
                                      st.q1, st.q2, s)
    # the transmitter stays far outside the disk here, so the clamped
    # equality values make all three constraints active
    np.testing.assert_allclose(res["gn"], 0.0, atol=1e-10)
    np.testing.assert_allclose(res["eve_tx"], 0.0, atol=1e-10)
    np.testing.assert_allclose(res["eve_jam"], 0.0, atol=1e-10)


def test_linearized_feasibility_implies_original(rng):
    s = make_scenario()
    checked = 0
    while checked < 10_000:
        st = random_state(rng, s, spread=4.0)
        q1 = st.q1 + rng.uniform(-8, 8, st.q1.shape)
        q2 = st.q2 + rng.uniform(-8, 8, st.q2.shape)
        floors = np.array([s.altitude_jam ** 2, s.altitude_tx ** 2,
                           s.altitude_jam ** 2 + s.eve_uncertainty ** 2])
        zeros = np.zeros(s.num_slots)
        caps = topt.linearized_constraints(q1, q2, zeros, zeros, zeros,
                                           st.q1, st.q2, s)
        zeta_hi, xi_hi, tau_hi = -caps["gn"], -caps["eve_tx"], -caps["eve_jam"]
        ok = (zeta_hi >= floors[0]) & (xi_hi >= floors[1]) & (tau_hi >= floors[2])
        if not ok.any():
            continue
        u = rng.uniform(0, 1, (3, s.num_slots))
        zeta = floors[0] + u[0] * (zeta_hi - floors[0])
        xi = floors[1] + u[1] * (xi_hi - floors[1])
        tau = floors[2] + u[2] * (tau_hi - floors[2])
        res = topt.linearized_constraints(q1, q2, zeta, xi, tau, st.q1, st.q2, s)
        sel = ok
        assert (res["gn"][sel] <= 1e-9).all()
        assert (res["eve_tx"][sel] <= 1e-9).all()
        assert (res["eve_jam"][sel] <= 1e-9).all()
        # the original auxiliary inequalities hold wherever the linearized ones do
        orig_zeta = ((q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2
        d1 = np.linalg.norm(q1 - s.we, axis=1) - s.eve_uncertainty
        orig_xi = d1 * d1 + s.altitude_tx ** 2
        d2 = np.linalg.norm(q2 - s.we, axis=1) + s.eve_uncertainty
        orig_tau = d2 * d2 + s.altitude_jam ** 2
        assert (zeta[sel] <= orig_zeta[sel] + 1e-9).all()
        assert (xi[sel] <= orig_xi[sel] + 1e-9).all()
        assert (tau[sel] <= orig_tau[sel] + 1e-9).all()
        checked += int(sel.sum()) * 3
    assert checked >= 10_000


def test_zero_radius_reduces_tx_constraint_to_gn_form(rng):
    s = make_scenario(eve_uncertainty=0.0)
    st = random_state(rng, s)
    q1 = st.q1 + rng.uniform(-5, 5, st.q1.shape)
    xi = rng.uniform(1e4, 3e4, s.num_slots)
    res = topt.linearized_constraints(q1, st.q2, st.zeta, xi, st.tau,
                                      st.q1, st.q2, s)
    u1 = st.q1 - s.we
    tangent = ((u1 ** 2).sum(axis=1)
               + 2.0 * (u1 * (q1 - st.q1)).sum(axis=1) + s.altitude_tx ** 2)
    np.testing.assert_allclose(res["eve_tx"], xi - tangent, rtol=1e-12, atol=1e-9)


def test_surrogate_rhat_tight_at_expansion(rng):
    s = make_scenario()
    st = random_state(rng, s)
    got = topt.surrogate_rhat(st.q1, st.q2, st.zeta, st.xi, st.tau, st, s)
    want = topt.rhat(st.q1, st.q2, st.zeta, st.xi, st.tau, st.p1, st.p2, s)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_surrogate_rhat_never_overestimates(rng):
    s = make_scenario()
    st = random_state(rng, s)
    n = s.num_slots
    for _ in range(10_000 // n):
        q1 = st.q1 + rng.uniform(-40, 40, st.q1.shape)
        q2 = st.q2 + rng.uniform(-40, 40, st.q2.shape)
        zeta, xi, tau = topt.aux_equality(q1, q2, s)
        sur = topt.surrogate_rhat(q1, q2, zeta, xi, tau, st, s)
        true = topt.rhat(q1, q2, zeta, xi, tau, st.p1, st.p2, s)
        assert (sur <= true + 1e-9).all()


def test_surrogate_rhat_gradient_matches_truth(rng):
    s = make_scenario()
    st = random_state(rng, s)
    h = 1e-4
    for which in range(4):
        def shift(q1, q2, delta):
            q1, q2 = q1.copy(), q2.copy()
            if which < 2:
                q1[:, which] += delta
            else:
                q2[:, which - 2] += delta
            return q1, q2

        def sur_at(delta):
            q1, q2 = shift(st.q1, st.q2, delta)
            return topt.surrogate_rhat(q1, q2, st.zeta, st.xi, st.tau, st, s)

        def true_at(delta):
            # partial derivative in q at fixed auxiliaries, matching the
            # tangency claim of the linearization
            q1, q2 = shift(st.q1, st.q2, delta)
            return topt.rhat(q1, q2, st.zeta, st.xi, st.tau, st.p1, st.p2, s)

        d_sur = (sur_at(h) - sur_at(-h)) / (2 * h)
        d_true = (true_at(h) - true_at(-h)) / (2 * h)
        np.testing.assert_allclose(d_sur, d_true, rtol=1e-4, atol=1e-7)


def test_single_slot_matches_grid_oracle(rng):
    s = make_scenario(num_slots=1, eve_uncertainty=5.0,
                      start_tx=(-5.0, 20.0), end_tx=(5.0, 20.0),
                      start_jam=(-5.0, 20.0), end_jam=(5.0, 20.0))
    pw = PowerProfile(np.array([1.0]), np.array([1.0]))
    traj, hist = topt.optimize_trajectory(pw, straight_trajectory(s), s)

    # exhaustive 1 m grid over the intersection of the two reachable disks,
    # jointly for both UAVs
    xs = np.arange(-16.0, 16.0 + 1e-9, 1.0)
    ys = np.arange(9.0, 31.0 + 1e-9, 1.0)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    start = np.array([-5.0, 20.0])
    end = np.array([5.0, 20.0])
    reach = ((np.linalg.norm(pts - start, axis=1) <= s.max_step_tx + 1e-12)
             & (np.linalg.norm(pts - end, axis=1) <= s.max_step_tx + 1e-12))
    pts = pts[reach]
    q1 = np.repeat(pts, len(pts), axis=0)
    q2 = np.tile(pts, (len(pts), 1))
    r0, re = channel.rates_profile(
        topt._assemble_trajectory(q1[:1], q2[:1], s), pw, s)[:2]  # warm-up

    g1 = s.gamma0 / (((q1 - s.w0) ** 2).sum(axis=1) + s.altitude_tx ** 2)
    g2 = s.gamma0 / (((q2 - s.w0) ** 2).sum(axis=1) + s.altitude_jam ** 2)
    de = np.maximum(np.linalg.norm(q1 - s.we, axis=1) - s.eve_uncertainty, 0.0)
    h1t = s.gamma0 / (de * de + s.altitude_tx ** 2)
    dj = np.linalg.norm(q2 - s.we, axis=1) + s.eve_uncertainty
    h2t = s.gamma0 / (dj * dj + s.altitude_jam ** 2)
    rbar = (np.log2(1 + g1 * 1.0 / (g2 * 1.0 + 1))
            - np.log2(1 + h1t * 1.0 / (h2t * 1.0 + 1)))
    assert hist[-1] == pytest.approx(rbar.max(), abs=1e-2)


def test_ascent_and_feasibility(rng):
    s = make_scenario()
    pw = constant_profile(s)
    traj, hist = topt.optimize_trajectory(pw, straight_trajectory(s), s)
    assert all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
    assert hist[-1] > hist[0]
    assert traj.check(s) == []


def test_endpoints_bit_identical():
    s = make_scenario()
    pw = constant_profile(s)
    traj, _ = topt.optimize_trajectory(pw, straight_trajectory(s), s)
    assert np.array_equal(traj.waypoints_tx[0], np.asarray(s.start_tx))
    assert np.array_equal(traj.waypoints_tx[-1], np.asarray(s.end_tx))
    assert np.array_equal(traj.waypoints_jam[0], np.asarray(s.start_jam))
    assert np.array_equal(traj.waypoints_jam[-1], np.asarray(s.end_jam))


def test_jammer_path_irrelevant_without_jam_power(rng):
    s = make_scenario()
    pw = constant_profile(s, p2=0.0)
    traj, hist = topt.optimize_trajectory(pw, straight_trajectory(s), s)
    swapped = traj.copy()
    swapped.waypoints_jam = straight_trajectory(s).waypoints_jam
    assert channel.objective(swapped, pw, s).avg_rbar == pytest.approx(
        hist[-1], rel=1e-12, abs=1e-12)


def test_iterates_respect_step_limits(rng, monkeypatch):
    seen = []
    original = solver.solve

    def spy(problem, **kwargs):
        report = original(problem, **kwargs)
        seen.append(report)
        return report

    monkeypatch.setattr(solver, "solve", spy)
    s = make_scenario()
    pw = constant_profile(s)
    topt.optimize_trajectory(pw, straight_trajectory(s), s)
    assert seen
    base = 7 * np.arange(s.num_slots)
    for report in seen:
        q1 = np.stack([report.x[base], report.x[base + 1]], axis=1)
        q2 = np.stack([report.x[base + 2], report.x[base + 3]], axis=1)
        traj = topt._assemble_trajectory(q1, q2, s)
        assert traj.check(s) == []


def test_aux_variables_active_at_subproblem_optimum(rng):
    # with strictly positive powers the objective pulls every auxiliary up
    # against its distance cap, so no slack survives at the optimum
    s = make_scenario()
    st = random_state(rng, s, spread=2.0)
    st.p1[:] = rng.uniform(0.5, 2.0, s.num_slots)
    st.p2[:] = rng.uniform(0.5, 2.0, s.num_slots)
    problem = topt.build_trajectory_subproblem(st, s)
    report = solver.solve(problem)
    assert report.status == solver.CONVERGED
    base = 7 * np.arange(s.num_slots)
    q1 = np.stack([report.x[base], report.x[base + 1]], axis=1)
    q2 = np.stack([report.x[base + 2], report.x[base + 3]], axis=1)
    res = topt.linearized_constraints(q1, q2, report.x[base + 4],
                                      report.x[base + 5], report.x[base + 6],
                                      st.q1, st.q2, s)
    for name, caps in (("gn", report.x[base + 4]),
                       ("eve_tx", report.x[base + 5]),
                       ("eve_jam", report.x[base + 6])):
        rel = np.abs(res[name]) / np.abs(caps)
        assert rel.max() <= 1e-4, f"{name} slack {rel.max():.2e}"


def test_invalid_initial_trajectory_rejected():
    s = make_scenario()
    bad = straight_trajectory(s)
    bad.waypoints_tx[3] += np.array([40.0, 0.0])
    with pytest.raises(ValueError, match="initial trajectory"):
        topt.optimize_trajectory(constant_profile(s), bad, s)


def test_hover_on_estimate_is_desingularized():
    # jammer parked exactly on the eavesdropper estimate (fly-hover-fly case)
    from uavsec.planner import fly_hover_fly
    s = make_scenario(num_slots=12, start_jam=(120.0, -60.0), end_jam=(120.0, 60.0),
                      start_tx=(-60.0, -60.0), end_tx=(-60.0, 60.0))
    traj = fly_hover_fly(s, hover_tx=(-60.0, 0.0), hover_jam=(120.0, 0.0))
    assert traj.check(s) == []
    assert (traj.waypoints_jam == np.asarray(s.est_eve_location)).all(axis=1).any()
    out, hist = topt.optimize_trajectory(constant_profile(s), traj, s)
    assert all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
    assert len(hist) > 1, "subproblem should solve despite the degenerate hover"
