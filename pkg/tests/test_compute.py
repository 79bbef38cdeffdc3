import numpy as np
import pytest

from twohop_aoi.compute import age_greedy_fill, bs_exec_time, uav_exec_time

ONE = np.array([True])


def test_uav_exec_examples():
    args = (np.array([0.5]), np.array([160000.0]), np.array([50.0]))
    assert uav_exec_time(ONE, *args, 4e6) == pytest.approx(1.0, rel=1e-15)
    assert uav_exec_time(~ONE, *args, 4e6) == 0.0
    assert uav_exec_time(ONE, *args, 2e6) == pytest.approx(2.0, rel=1e-15)


def test_bs_exec_examples():
    d, f = np.array([160000.0]), np.array([50.0])
    assert bs_exec_time(ONE, np.array([0.5]), d, f, 4e6) == pytest.approx(1.0, rel=1e-15)
    assert bs_exec_time(ONE, np.array([1.0]), d, f, 4e6) == 0.0
    assert bs_exec_time(~ONE, np.array([0.5]), d, f, 4e6) == 0.0


def test_zero_capacity_is_infinite():
    assert uav_exec_time(ONE, np.array([0.5]), np.array([1.0]), np.array([1.0]), 0.0) == float("inf")


def test_age_greedy_fill_skips_what_does_not_fit():
    sizes = {0: 0.7, 1: 0.5, 2: 0.2}
    chosen, stalled = age_greedy_fill([0, 1, 2], lambda sel: sum(sizes[i] for i in sel), 1.0)
    assert chosen == [0, 2] and not stalled
    chosen, stalled = age_greedy_fill([1], lambda sel: 2.0, 1.0)
    assert chosen == [] and stalled
    assert age_greedy_fill([], lambda sel: 0.0, 1.0) == ([], False)
