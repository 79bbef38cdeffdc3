import os
import subprocess
import sys

import numpy as np
import pytest

from twohop_aoi import _accel


@pytest.mark.skipif(not _accel._HAVE_NUMBA, reason="numba not installed")
def test_numba_and_numpy_agree():
    rng = np.random.default_rng(5)
    for _ in range(30):
        M, L, K = rng.integers(1, 6), rng.integers(1, 4), rng.integers(1, 8)
        rx = rng.uniform(0, 200, (M, 3))
        dev = rng.uniform(0, 200, (K, 3))
        np.testing.assert_allclose(_accel._nb_access_gain_matrix(rx, dev, 1e-4),
                                   _accel._np_access_gain_matrix(rx, dev, 1e-4), rtol=1e-14)
        hsq = rng.exponential(size=(M, L))
        hsq[0] = hsq[-1]
        power = rng.random((M, L))
        zeta = (rng.random((M, L)) < 0.6).astype(float)
        for literal in (False, True):
            a = _accel._nb_sic_sinr(hsq, power, zeta, 0.1, literal)
            b = _accel._np_sic_sinr(hsq, power, zeta, 0.1, literal)
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-13, atol=0)


def test_env_flag_selects_numpy():
    env = dict(os.environ, TWOHOP_AOI_JIT="0")
    out = subprocess.run([sys.executable, "-c", "from twohop_aoi import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_episode_identical_across_backends():
    code = ("from twohop_aoi.baselines import run_policy, PolicySpec;"
            "from twohop_aoi.scenario import ScenarioConfig;"
            "c=ScenarioConfig(n_devices=4,n_uavs=2,n_slots=30);"
            "print(repr(run_policy(c, PolicySpec('random', 1)).log.summary(c)))")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, TWOHOP_AOI_JIT=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]
