import numpy as np
import pytest

from helpers import mixed_rollout, tiny_config
from twohop_aoi.env import (ActionError, Env, bs_action_dim, check_feasible, decode_actions, observe, step,
                            uav_action_dim, uav_obs_dim, bs_obs_dim)
from twohop_aoi.scenario import ScenarioConfig, Stage, new_scenario


def _zeros(cfg):
    return np.zeros((cfg.n_uavs, uav_action_dim(cfg))), np.zeros(bs_action_dim(cfg))


def test_all_zero_raw_is_empty_schedule():
    cfg = ScenarioConfig(n_devices=3, n_uavs=2, n_slots=5)
    w = new_scenario(cfg)
    ja = decode_actions(w, *_zeros(cfg))
    for arr in (ja.psi, ja.phi, ja.z, ja.zeta, ja.j, ja.power, ja.f_uav, ja.f_bs):
        assert not np.any(arr)
    np.testing.assert_array_equal(ja.vel, -cfg.v_max * np.ones((2, 2)))
    raw_u, raw_b = _zeros(cfg)
    raw_u[:, -2:] = 0.5
    assert not decode_actions(w, raw_u, raw_b).vel.any()


def test_single_device_is_scheduled():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_access_sub=1, n_slots=5)
    w = new_scenario(cfg)
    raw_u, raw_b = _zeros(cfg)
    raw_u[0, 0] = 0.9
    ja = decode_actions(w, raw_u, raw_b)
    assert ja.psi[0, 0, 0]
    raw_u[0, 0] = 0.49
    assert not decode_actions(w, raw_u, raw_b).psi.any()


def test_backhaul_top_k_and_tie():
    cfg = ScenarioConfig(n_devices=2, n_uavs=2, n_backhaul_sub=1, uavs_per_backhaul_sub=1, n_slots=5)
    w = new_scenario(cfg)
    raw_u, raw_b = _zeros(cfg)
    raw_b[:2] = [0.8, 0.9]
    assert list(decode_actions(w, raw_u, raw_b).zeta[:, 0]) == [False, True]
    raw_b[:2] = [0.9, 0.9]
    assert list(decode_actions(w, raw_u, raw_b).zeta[:, 0]) == [True, False]


def test_power_renormalised_to_budget():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_backhaul_sub=2, n_slots=5)
    w = new_scenario(cfg)
    raw_u, raw_b = _zeros(cfg)
    K = cfg.n_devices * cfg.n_access_sub
    raw_u[0, K:K + 2] = 1.0
    raw_b[:2] = 1.0
    ja = decode_actions(w, raw_u, raw_b)
    assert ja.power.sum() == pytest.approx(cfg.p_max)


def test_bad_raw_rejected():
    cfg = ScenarioConfig(n_devices=2, n_uavs=1, n_slots=5)
    w = new_scenario(cfg)
    raw_u, raw_b = _zeros(cfg)
    raw_u[0, 0] = np.nan
    with pytest.raises(ActionError):
        decode_actions(w, raw_u, raw_b)
    with pytest.raises(ActionError):
        decode_actions(w, np.zeros((1, 3)), raw_b)


def test_observe_fresh_pure_and_sentinel():
    cfg = ScenarioConfig(n_devices=4, n_uavs=2, r_max=1.0, n_slots=5)
    w = new_scenario(cfg)
    u1, b1 = observe(w)
    u2, b2 = observe(w)
    for a, b in zip(u1, u2):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(b1, b2)
    assert len(u1[0]) == uav_obs_dim(cfg) and len(b1) == bs_obs_dim(cfg)
    assert not b1[: cfg.n_devices].any()
    per = u1[0][: 5 * cfg.n_devices].reshape(cfg.n_devices, 5)
    # nobody is within 1 m horizontally, so every device slot is the sentinel
    assert np.all(per == -1.0)
    cfg2 = cfg.replace(r_max=1000.0)
    per = observe(new_scenario(cfg2))[0][0][: 5 * cfg.n_devices].reshape(cfg.n_devices, 5)
    assert np.all(per[:, 0] == 0.0)
    assert np.all(np.isfinite(np.concatenate(u1 + [b1])))


def test_idle_slot_reward_example():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_slots=5, k1=0.1, k2=0.1, r_max=1000.0)
    w = new_scenario(cfg)
    w.stage[0] = Stage.AT_UAV
    w.uav_of[0] = 0
    w.delta_m[0] = 3
    w.delta0[0] = 2
    _, rewards, rec, info = step(w, decode_actions(w, *_zeros(cfg)))
    assert w.delta_m[0] == 4 and w.delta0[0] == 2
    assert rewards[0] == pytest.approx(-0.4)
    assert rewards[1] == pytest.approx(-0.1)
    assert rec.violations == 0


def test_waiting_device_counts_up():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_slots=5)
    env = Env(cfg)
    env.reset()
    env.step(*_zeros(cfg))
    env.step(*_zeros(cfg))
    assert env.world.delta0[0] == 2


def test_decoded_random_actions_are_feasible():
    rng = np.random.default_rng(4)
    for _ in range(40):
        cfg = tiny_config(rng, n_devices=int(rng.integers(1, 6)), n_uavs=int(rng.integers(1, 4)))
        env = Env(cfg)
        env.reset()
        while not env.done:
            raw_u = rng.random((cfg.n_uavs, uav_action_dim(cfg)))
            raw_b = rng.random(bs_action_dim(cfg))
            ja = decode_actions(env.world, raw_u, raw_b)
            assert check_feasible(env.world, ja) == []
            env.step_joint(ja)


def test_return_recomputed_from_log():
    rng = np.random.default_rng(8)
    for no_uav in (False, True):
        for _ in range(10):
            cfg = tiny_config(rng, no_uav=no_uav, violation_penalty=0.5)
            env = Env(cfg)
            env.reset()
            total, want = 0.0, 0.0
            while not env.done:
                raw_u = rng.random((cfg.n_uavs, uav_action_dim(cfg)))
                raw_b = rng.random(bs_action_dim(cfg))
                _, rewards, rec, info = env.step(raw_u, raw_b)
                assert np.all(rewards <= 0)
                total += rewards[-1]
                want += -cfg.k2 * float(env.world.delta_b.sum()) - 0.5 * info["violations"][-1]
                assert rec.objective == pytest.approx(cfg.k1 * rec.mean_m + cfg.k2 * rec.mean_b)
            assert total == pytest.approx(want, rel=1e-12)
            ages = np.array(env.log.delta_b).sum()
            viol = sum(r.violations for r in env.log.records)
            assert viol >= 0 and ages >= 0


def test_step_is_deterministic():
    rng = np.random.default_rng(2)
    cfg = tiny_config(rng, n_slots=15)
    a = mixed_rollout(cfg, np.random.default_rng(5))
    b = mixed_rollout(cfg, np.random.default_rng(5))
    assert a.world.fingerprint() == b.world.fingerprint()
    assert a.log.trace_rows() == b.log.trace_rows()


def test_trace_rows_layout():
    cfg = ScenarioConfig(n_devices=2, n_uavs=1, n_slots=3)
    env = Env(cfg)
    env.reset()
    for _ in range(3):
        env.step(*_zeros(cfg))
    rows = env.log.trace_rows()
    assert len(rows) == 6
    assert rows[0] == [1, 0, 1, 1, 1, "AT_DEVICE"]
