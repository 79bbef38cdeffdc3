import numpy as np
import pytest

from twohop_aoi.accounting import report_params
from twohop_aoi.learn import Trainer, TrainerConfig, critic_targets, expected_network_count, train
from twohop_aoi.learn.nets import TrainingError
from twohop_aoi.scenario import ScenarioConfig

TOY = ScenarioConfig(n_devices=2, n_uavs=2, n_access_sub=2, n_backhaul_sub=2, n_slots=20)


def small(**kw):
    base = dict(episodes=3, iters_per_episode=20, batch=8, warmup=16, actor_hidden=(8,), critic_hidden=(8,))
    base.update(kw)
    return TrainerConfig(**base)


def test_critic_target_examples():
    y_g, y_l = critic_targets([-1.0], [[-2.0, -3.0]], [[5.0], [3.0]], [[4.0], [7.0]], 0.0)
    assert y_g[0] == -1.0
    np.testing.assert_array_equal(y_l, [[-2.0, -3.0]])
    y_g, _ = critic_targets([0.0], [[0.0]], [[5.0], [3.0]], [[0.0]], 1.0 - 1e-12)
    assert y_g[0] == pytest.approx(3.0)
    y_g, y_l = critic_targets([-1.0], [[-1.0]], [[-10.0], [-10.0]], [[-10.0]], 0.99)
    assert y_g[0] == pytest.approx(-10.9, rel=1e-14) and y_l[0, 0] == pytest.approx(-10.9, rel=1e-14)


def test_registry_counts():
    for M in (1, 2, 3):
        cfg = TOY.replace(n_uavs=M)
        for local in (True, False):
            tr = Trainer(cfg, small(local_critics=local))
            assert len(tr.registry()) == expected_network_count(M, local)
    assert expected_network_count(2) == 2 * (2 * (1 + 1) + (2 + 1))


def test_targets_start_as_copies():
    tr = Trainer(TOY, small())
    reg = tr.registry()
    for name, net in reg.items():
        if name.startswith("target_"):
            np.testing.assert_array_equal(net.params.values, reg[name[len("target_"):]].params.values)


def test_report_params_consistent():
    tr = Trainer(TOY, small())
    rep = report_params(tr)
    assert rep["n_networks"] == 14
    assert rep["total"] == 2 * rep["trainable"]
    assert rep["networks"]["actor_uav0"] == (tr.du_obs * 8 + 8) + (8 * tr.du_act + tr.du_act)


def test_zero_episodes_returns_untrained():
    tc = small(episodes=0)
    res = train(TOY, tc)
    fresh = Trainer(TOY, tc)
    assert res.curve == [] and res.records == []
    for (a, na), (b, nb) in zip(res.trainer.registry().items(), fresh.registry().items()):
        np.testing.assert_array_equal(na.params.values, nb.params.values)


@pytest.mark.parametrize("mode", ["maddpg", "frl"])
def test_same_seed_same_curve(mode):
    a = train(TOY, small(fed_period=2), mode)
    b = train(TOY, small(fed_period=2), mode)
    assert a.curve == b.curve
    for (_, x), (_, y) in zip(a.trainer.registry().items(), b.trainer.registry().items()):
        np.testing.assert_array_equal(x.params.values, y.params.values)
    c = train(TOY, small(fed_period=2, seed=1), mode)
    assert c.curve != a.curve


def test_frl_aggregates_and_logs_events():
    res = train(TOY, small(fed_period=2), "frl")
    assert res.trainer.aggregations > 0
    assert len(res.events.rows) == res.trainer.aggregations
    assert sum(r[8] for r in res.curve) == res.trainer.aggregations
    for row in res.events.rows:
        assert float(row[4]) <= float(row[3])
    assert train(TOY, small(), "maddpg").trainer.aggregations == 0


def test_overhead_bytes_on_exchange_slots():
    res = train(TOY, small(), "maddpg")
    paid = [r.bytes_overhead for r in res.records]
    assert paid[0] == 0.0 and paid[-1] > 0.0


def test_divergence_guard():
    with pytest.raises(TrainingError, match="exceeds bound"):
        train(TOY, small(loss_bound=1e-12))


def test_invalid_configs():
    with pytest.raises(ValueError):
        small(gamma=1.0).validate()
    with pytest.raises(ValueError):
        small(tau=2.0).validate()
    with pytest.raises(ValueError):
        TrainerConfig.from_dict({"nope": 1})
    with pytest.raises(ValueError):
        train(TOY, small(iters_per_episode=50))
    with pytest.raises(ValueError):
        Trainer(TOY, small(), mode="ppo")


def test_config_round_trip():
    tc = small(actor_hidden=(4, 5))
    assert TrainerConfig.from_dict(tc.to_dict()) == tc


def test_soft_update_schedule():
    tc = small(tau=1.0, policy_delay=1)
    tr = Trainer(TOY, tc)
    rng = np.random.default_rng(0)
    for _ in range(tc.batch):
        tr.buffer.add(rng.random((2, tr.du_obs)), rng.random((2, tr.du_act)), rng.random(tr.db_obs),
                      rng.random(tr.db_act), -rng.random(2), -rng.random(), rng.random((2, tr.du_obs)),
                      rng.random(tr.db_obs))
    tr.train_step(rng)
    reg = tr.registry()
    for name, net in reg.items():
        if name.startswith("target_"):
            np.testing.assert_array_equal(net.params.values, reg[name[len("target_"):]].params.values)


def test_noise_decays_linearly():
    tr = Trainer(TOY, small(episodes=5, noise_start=0.4, noise_end=0.0))
    assert [round(tr.noise_at(e), 12) for e in range(5)] == [0.4, 0.3, 0.2, 0.1, 0.0]
