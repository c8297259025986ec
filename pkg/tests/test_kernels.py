import os
import subprocess
import sys

import numpy as np
import pytest

from uavsec import kernels


def _random_slot_inputs(rng, n=64):
    q1 = rng.uniform(-500, 500, (n, 2))
    q2 = rng.uniform(-500, 500, (n, 2))
    p1 = rng.uniform(0, 4, n)
    p2 = rng.uniform(0, 4, n)
    return q1, q2, p1, p2


@pytest.mark.skipif(kernels.NUMBA_LANE is None, reason="numba not installed")
def test_slot_rates_lanes_agree(rng):
    q1, q2, p1, p2 = _random_slot_inputs(rng)
    args = (q1, q2, p1, p2, 0.0, 0.0, 60.0, 0.0, 5.0, 1e4, 1.21e4, 1e8)
    r0_nb, re_nb = kernels.NUMBA_LANE[0](*args)
    r0_np, re_np = kernels.NUMPY_LANE[0](*args)
    np.testing.assert_allclose(r0_nb, r0_np, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(re_nb, re_np, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(kernels.NUMBA_LANE is None, reason="numba not installed")
def test_power_rows_lanes_agree(rng):
    n = 64
    p1 = rng.uniform(0, 4, n)
    p2 = rng.uniform(0, 4, n)
    g1 = rng.uniform(1e2, 1e4, n)
    g2 = rng.uniform(1e2, 1e4, n)
    h2t = rng.uniform(1e2, 1e4, n)
    lin1 = rng.uniform(0, 1e3, n)
    lin2 = rng.uniform(0, 1e3, n)
    c0 = rng.uniform(-5, 5, n)
    args = (p1, p2, g1, g2, h2t, lin1, lin2, c0, 1.0 / n)
    out_nb = kernels.NUMBA_LANE[1](*args)
    out_np = kernels.NUMPY_LANE[1](*args)
    for a, b in zip(out_nb, out_np):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


@pytest.mark.skipif(kernels.NUMBA_LANE is None, reason="numba not installed")
def test_traj_rows_lanes_agree(rng):
    n = 64
    xs = np.column_stack([
        rng.uniform(-300, 300, (n, 4)),
        rng.uniform(1.3e4, 3e5, (n, 3)),
    ])
    p1 = rng.uniform(0, 4, n)
    p2 = rng.uniform(0, 4, n)
    qa = rng.uniform(0, 1e-4, n)
    qb = rng.uniform(0, 1e-4, n)
    qc = rng.uniform(0, 1e-4, n)
    c0 = rng.uniform(-5, 5, n)
    args = (xs, p1, p2, qa, qb, qc, c0, 1e8, 0.0, 0.0, 60.0, 0.0, 5.0,
            1e-12, 1.0 / n)
    out_nb = kernels.NUMBA_LANE[2](*args)
    out_np = kernels.NUMPY_LANE[2](*args)
    for a, b in zip(out_nb, out_np):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


def test_backend_selection_reports_lane():
    assert kernels.BACKEND in ("numba", "numpy")
    if kernels.NUMBA_LANE is not None:
        assert kernels.BACKEND == "numba"


def test_env_flag_forces_numpy_lane():
    code = "import uavsec.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, UAVSEC_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_env_flag_rejects_unknown_value():
    code = "import uavsec.kernels"
    env = dict(os.environ, UAVSEC_BACKEND="cuda")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0
    assert "UAVSEC_BACKEND" in out.stderr
