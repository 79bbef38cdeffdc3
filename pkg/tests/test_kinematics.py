import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from twohop_aoi.kinematics import apply_move, clip_displacement, coverage_matrix, in_coverage


def test_long_command_clipped_to_max_step():
    disp = clip_displacement([[6.0, 8.0]], 5.0)
    assert np.isclose(np.hypot(*disp[0]), 5.0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(disp[0], [3.0, 4.0], rtol=1e-15)


def test_double_command_moves_exactly_one_step():
    xy = np.array([[100.0, 100.0]])
    new, disp, flags = apply_move(xy, np.array([[10.0, 0.0]]), 5.0, 200.0, 10.0)
    assert np.hypot(*disp[0]) == 5.0
    assert flags.sum() == 0


def test_opposing_small_moves_are_fine():
    xy = np.array([[100.0, 100.0], [110.0, 100.0]])
    new, _, flags = apply_move(xy, np.array([[-1.0, 0.0], [1.0, 0.0]]), 5.0, 200.0, 5.0)
    np.testing.assert_array_equal(new, [[99.0, 100.0], [111.0, 100.0]])
    assert flags.sum() == 0


def test_converging_pair_holds_and_is_flagged():
    xy = np.array([[100.0, 100.0], [110.0, 100.0]])
    new, disp, flags = apply_move(xy, np.array([[3.5, 0.0], [-3.5, 0.0]]), 5.0, 200.0, 5.0)
    np.testing.assert_array_equal(new, xy)
    assert not disp.any()
    assert list(flags) == [1, 1]


def test_held_uav_can_block_a_third():
    # 0 and 1 collide and hold; 2 then moves onto 1's held position
    xy = np.array([[100.0, 100.0], [108.0, 100.0], [116.0, 100.0]])
    cmds = np.array([[4.0, 0.0], [-4.0, 0.0], [-4.0, 0.0]])
    new, _, flags = apply_move(xy, cmds, 5.0, 200.0, 5.0)
    np.testing.assert_array_equal(new, xy)
    assert flags.sum() >= 4


def test_box_clipping():
    new, disp, _ = apply_move(np.array([[1.0, 199.0]]), np.array([[-4.0, 4.0]]), 5.0, 200.0, 10.0)
    np.testing.assert_array_equal(new, [[0.0, 200.0]])
    np.testing.assert_array_equal(disp, [[-1.0, 1.0]])


def test_coverage_examples():
    h, r = 100.0, 300.0
    # literal 3-D reading when colocated: the distance is the altitude
    assert in_coverage([5.0, 5.0, h], [5.0, 5.0, 0.0], r, "3d") == (h <= r)
    assert not in_coverage([5.0, 5.0, 150.0], [5.0, 5.0, 0.0], 100.0, "3d")
    assert not in_coverage([0.0, 0.0, h], [r + 1, 0.0, 0.0], r)
    assert in_coverage([0.0, 0.0, h], [r, 0.0, 0.0], r)
    assert in_coverage([0.0, 0.0, h], [5.0, 5.0, 0.0], 10.0)


def test_coverage_matrix_matches_scalar():
    rng = np.random.default_rng(3)
    uav = np.column_stack([rng.uniform(0, 200, (4, 2)), np.full(4, 100.0)])
    dev = np.column_stack([rng.uniform(0, 200, (6, 2)), np.zeros(6)])
    for metric in ("horizontal", "3d"):
        cov = coverage_matrix(uav, dev, 120.0, metric)
        for m in range(4):
            for k in range(6):
                assert cov[m, k] == in_coverage(uav[m], dev[k], 120.0, metric)


coords = st.floats(0.0, 200.0, allow_nan=False)
cmd = st.floats(-20.0, 20.0, allow_nan=False)


@given(st.lists(st.tuples(coords, coords, cmd, cmd), min_size=1, max_size=5))
def test_move_invariants(rows):
    d_min = 10.0
    xy = np.array([[r[0], r[1]] for r in rows])
    keep = []
    for i, p in enumerate(xy):
        if all(np.hypot(*(p - xy[j])) >= d_min for j in keep):
            keep.append(i)
    xy = xy[keep]
    cmds = np.array([[rows[i][2], rows[i][3]] for i in keep])
    new, disp, flags = apply_move(xy, cmds, 5.0, 200.0, d_min)
    assert np.all((new >= 0) & (new <= 200))
    assert np.all(np.hypot(disp[:, 0], disp[:, 1]) <= 5.0 + 1e-12)
    n = len(new)
    for a in range(n):
        for b in range(a + 1, n):
            assert np.hypot(*(new[a] - new[b])) >= d_min
    again, d0, f0 = apply_move(new, np.zeros_like(cmds), 5.0, 200.0, d_min)
    np.testing.assert_array_equal(again, new)
    assert not d0.any() and not f0.any()
