import numpy as np
import pytest

from twohop_aoi.baselines import (PolicySpec, SearchLimitError, check_oracle_limits, even_power, make_policy,
                                  no_uav_scenario, ofdma_backhaul_variant, oracle_schedule, replay_schedule,
                                  run_policy)
from twohop_aoi.env import bs_action_dim, check_feasible, decode_actions, uav_action_dim
from twohop_aoi.scenario import ConfigError, ScenarioConfig, Stage, new_scenario

FROZEN = dict(n_access_sub=1, n_backhaul_sub=1, frozen=True, r_max=1000.0)


def _objective(env):
    return env.log.summary(env.cfg)[2]


def test_greedy_schedules_lone_task():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_slots=3, **FROZEN)
    w = new_scenario(cfg)
    ja = decode_actions(w, *make_policy(PolicySpec("greedy_max_age"), cfg).act(w))
    assert ja.psi[0, 0, 0]


def test_greedy_prefers_older_task():
    cfg = ScenarioConfig(n_devices=2, n_uavs=1, n_slots=10, **FROZEN)
    w = new_scenario(cfg)
    w.t = 7
    w.t_gen[:] = [4, 0]
    ja = decode_actions(w, *make_policy(PolicySpec("greedy_max_age"), cfg).act(w))
    assert ja.psi[0, 1, 0] and not ja.psi[0, 0, 0]
    w.t_gen[:] = [0, 4]
    ja = decode_actions(w, *make_policy(PolicySpec("greedy_max_age"), cfg).act(w))
    assert ja.psi[0, 0, 0] and not ja.psi[0, 1, 0]


def test_random_is_seeded():
    cfg = ScenarioConfig(n_devices=3, n_uavs=2, n_slots=5)
    w = new_scenario(cfg)
    a = make_policy(PolicySpec("random", 4), cfg).act(w)
    b = make_policy(PolicySpec("random", 4), cfg).act(w)
    c = make_policy(PolicySpec("random", 5), cfg).act(w)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_round_robin_cycles():
    cfg = ScenarioConfig(n_devices=3, n_uavs=1, n_access_sub=1, n_slots=5, r_max=1000.0)
    pol = make_policy(PolicySpec("round_robin"), cfg)
    w = new_scenario(cfg)
    firsts = []
    for _ in range(4):
        raw_u, _ = pol.act(w)
        firsts.append(int(np.argmax(raw_u[0, :3])))
    assert firsts == [0, 1, 2, 0]


def test_greedy_has_no_violations_without_fading():
    rng = np.random.default_rng(0)
    for i in range(8):
        cfg = ScenarioConfig(n_devices=int(rng.integers(2, 9)), n_uavs=int(rng.integers(1, 4)), n_slots=30,
                             backhaul_fading=False, seed=i)
        env = run_policy(cfg, PolicySpec("greedy_max_age"))
        assert sum(r.violations for r in env.log.records) == 0


def test_decoded_baseline_actions_feasible():
    cfg = ScenarioConfig(n_devices=6, n_uavs=3, n_slots=20)
    for kind in ("random", "round_robin", "greedy_max_age"):
        pol = make_policy(PolicySpec(kind, 1), cfg)
        env = run_policy(cfg, PolicySpec(kind, 1))
        assert len(env.log.records) == cfg.n_slots
        w = new_scenario(cfg)
        assert check_feasible(w, decode_actions(w, *pol.act(w))) == []


def test_variants():
    cfg = ScenarioConfig(lambda_k=0.7)
    nu = no_uav_scenario(cfg)
    assert nu.n_uavs == 0 and nu.no_uav and np.all(nu.lam == 0.0)
    assert ofdma_backhaul_variant(cfg).uavs_per_backhaul_sub == 1


def test_noma_schedules_twice_the_uavs_of_ofdma():
    cfg = ScenarioConfig(n_devices=4, n_uavs=4, n_backhaul_sub=2, uavs_per_backhaul_sub=2, n_slots=5)
    counts = []
    for c in (cfg, ofdma_backhaul_variant(cfg)):
        w = new_scenario(c)
        ja = decode_actions(w, np.ones((4, uav_action_dim(c))), np.ones(bs_action_dim(c)))
        counts.append(int(ja.zeta.sum()))
        if c.uavs_per_backhaul_sub == 1:
            # a lone UAV on a subcarrier hears nobody
            assert not ja.interference[ja.zeta].any()
    assert counts == [4, 2]


def test_even_power():
    z = np.array([[True, True], [True, False], [False, False]])
    np.testing.assert_array_equal(even_power(z, 1.0), [[0.5, 0.5], [1.0, 0.0], [0.0, 0.0]])


def _arrival_ages(env):
    """Delta_b right after each slot in which a task reached the BS."""
    arrive = [(r.upload if env.cfg.no_uav else r.forward) for r in env.world.records]
    return [int(env.log.delta_b[t][0]) for t in arrive if t >= 0]


def test_oracle_unobstructed_single_task():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_slots=8, **FROZEN)
    obj, sched = oracle_schedule(cfg)
    env = replay_schedule(cfg, sched)
    assert _objective(env) == obj
    rec = env.world.records[0]
    assert (rec.upload, rec.uav_proc, rec.forward, rec.done) == (0, 1, 2, 3)
    # upload, UAV share and forward each take one slot after generation
    assert _arrival_ages(env) == [3, 3]
    assert obj == _objective(run_policy(cfg, PolicySpec("greedy_max_age")))


def test_oracle_no_uav_pipeline_is_two_shorter():
    cfg = ScenarioConfig(n_devices=1, n_uavs=1, n_slots=8, **FROZEN)
    nu = no_uav_scenario(cfg)
    obj, sched = oracle_schedule(nu)
    env = replay_schedule(nu, sched)
    assert _objective(env) == obj
    with_uav = replay_schedule(cfg, oracle_schedule(cfg)[1])
    assert min(_arrival_ages(env)) == min(_arrival_ages(with_uav)) - 2 == 1


def test_zero_devices_not_constructible():
    with pytest.raises(ConfigError):
        ScenarioConfig(n_devices=0)


def test_oracle_beats_baselines_on_shared_subcarrier():
    for seed in range(3):
        cfg = ScenarioConfig(n_devices=2, n_uavs=1, n_slots=6, seed=seed, **FROZEN)
        obj, sched = oracle_schedule(cfg)
        assert _objective(replay_schedule(cfg, sched)) == obj
        for kind in ("greedy_max_age", "random", "round_robin"):
            assert obj <= _objective(run_policy(cfg, PolicySpec(kind, seed)))


def test_oracle_guards():
    with pytest.raises(ConfigError):
        oracle_schedule(ScenarioConfig(n_devices=1, n_uavs=1, n_slots=4))
    with pytest.raises(ConfigError):
        check_oracle_limits(ScenarioConfig(n_devices=4, n_uavs=1, n_slots=4))
    with pytest.raises(SearchLimitError):
        oracle_schedule(ScenarioConfig(n_devices=3, n_uavs=2, n_slots=8, **FROZEN), max_states=50)
    with pytest.raises(ValueError):
        PolicySpec("dqn")
    with pytest.raises(ValueError):
        make_policy(PolicySpec("oracle"), ScenarioConfig())
