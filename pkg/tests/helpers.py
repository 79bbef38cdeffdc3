"""Shared drivers for tests: tiny random scenarios and mixed schedules."""

import numpy as np

from twohop_aoi.baselines import PolicySpec, make_policy, no_uav_scenario
from twohop_aoi.env import Env
from twohop_aoi.scenario import ScenarioConfig


def tiny_config(rng, no_uav=False, **over):
    kw = dict(
        n_devices=int(rng.integers(1, 4)),
        n_uavs=int(rng.integers(1, 3)),
        n_access_sub=int(rng.integers(1, 3)),
        n_backhaul_sub=int(rng.integers(1, 3)),
        n_slots=int(rng.integers(2, 21)),
        lambda_k=float(rng.choice([0.0, 0.3, 0.5, 1.0])),
        seed=int(rng.integers(0, 10_000)),
    )
    kw.update(over)
    cfg = ScenarioConfig(**kw)
    return no_uav_scenario(cfg) if no_uav else cfg


def mixed_rollout(cfg, rng, episode=0):
    """Each slot is driven by a randomly chosen baseline, giving varied feasible schedules."""
    pols = [make_policy(PolicySpec(kind, int(rng.integers(1000))), cfg)
            for kind in ("random", "round_robin", "greedy_max_age")]
    env = Env(cfg)
    env.reset(episode)
    for p in pols:
        p.reset(episode)
    while not env.done:
        p = pols[int(rng.integers(len(pols)))]
        env.step(*p.act(env.world))
    return env


def grad_check(net, X, dy, eps=1e-6, floor=1e-8):
    """Largest relative gap between backprop and central differences of ``sum(forward(X) * dy)``."""
    y, cache = net.forward_cache(X)
    grad, _ = net.backward(cache, dy)
    vals = net.params.values
    worst = 0.0
    for i in range(vals.size):
        keep = vals[i]
        vals[i] = keep + eps
        up = float(np.sum(net.forward(X) * dy))
        vals[i] = keep - eps
        down = float(np.sum(net.forward(X) * dy))
        vals[i] = keep
        num = (up - down) / (2 * eps)
        worst = max(worst, abs(num - grad[i]) / max(abs(num), abs(grad[i]), floor))
    return worst
