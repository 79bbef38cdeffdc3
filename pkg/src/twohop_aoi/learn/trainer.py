"""Multi-agent actor-critic trainer with twin global critics and optional federated actors.

Agents are the M UAVs plus the BS. Every UAV has an actor and a local critic
over its own observation and action; the BS has an actor only. Two global
critics see the concatenated observations and actions of all agents, and the
smaller of their target values forms the bootstrap target.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import env as envmod
from .. import fedavg
from ..scenario import ScenarioConfig
from .nets import MlpNet, TrainingError, grad_step, make_optimizer, soft_update
from .replay import ReplayBuffer

MODES = ("maddpg", "frl")


@dataclass
class TrainerConfig:
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    gamma: float = 0.99
    tau: float = 5e-4
    batch: int = 64
    episodes: int = 200
    iters_per_episode: int = 100
    policy_delay: int = 2
    noise_start: float = 0.3
    noise_end: float = 0.02
    fed_period: int = 5
    fed_w: float = 0.5
    actor_hidden: tuple = (64, 64)
    critic_hidden: tuple = (64, 64)
    buffer_capacity: int = 500_000
    warmup: int = 1000
    optimizer: str = "adam"
    loss_bound: float = 1e8
    reward_scale: float = 1.0
    local_critics: bool = True
    seed: int = 0

    def validate(self):
        for name in ("lr_actor", "lr_critic", "tau", "batch", "iters_per_episode", "policy_delay",
                     "fed_period", "buffer_capacity", "loss_bound", "reward_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.episodes < 0 or self.warmup < 0:
            raise ValueError("episodes and warmup must be non-negative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.tau > 1.0:
            raise ValueError("tau must be at most 1")
        if not 0.0 <= self.fed_w <= 1.0:
            raise ValueError("fed_w must lie in [0, 1]")
        if self.noise_start < 0 or self.noise_end < 0:
            raise ValueError("noise scales must be non-negative")
        return self

    def to_dict(self):
        d = asdict(self)
        d["actor_hidden"] = list(self.actor_hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("actor_hidden", "critic_hidden"):
            if k in d:
                d[k] = tuple(int(x) for x in d[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown trainer keys: {sorted(unknown)}")
        return cls(**d).validate()


def critic_targets(r_global, r_local, q_twin_next, q_local_next, gamma):
    """Bootstrap targets for the global and local critics.

    ``q_twin_next`` is ``(2, B)`` from the twin target critics; the smaller
    value is used. ``q_local_next`` is ``(M, B)``.
    """
    y_g = np.asarray(r_global) + gamma * np.min(q_twin_next, axis=0)
    y_l = np.asarray(r_local) + gamma * np.asarray(q_local_next).T if np.size(q_local_next) else np.asarray(r_local)
    return y_g, y_l


def expected_network_count(n_uav: int, local_critics: bool = True, twins: int = 2) -> int:
    """Live plus target networks: per UAV a local critic and an actor, then the
    twin global critics and the BS actor."""
    return 2 * (n_uav * (int(local_critics) + 1) + (twins + 1))


CURVE_HEADER = [
    "episode",
    "return_uav",
    "return_bs",
    "mean_delta_m",
    "mean_delta_b",
    "objective",
    "violations",
    "critic_loss",
    "aggregations",
]


@dataclass
class TrainResult:
    trainer: "Trainer"
    curve: list = field(default_factory=list)
    records: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    events: fedavg.EventLog = field(default_factory=fedavg.EventLog)

    def objectives(self):
        return np.array([row[5] for row in self.curve], dtype=float)

    def write_curve(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CURVE_HEADER)
            for row in self.curve:
                wr.writerow([row[0]] + [repr(float(x)) for x in row[1:7]] + [repr(float(row[7])), row[8]])


class Trainer:
    def __init__(self, cfg: ScenarioConfig, tcfg: TrainerConfig, mode: str = "maddpg"):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        tcfg.validate()
        self.cfg, self.tcfg, self.mode = cfg, tcfg, mode
        self.M = cfg.n_uavs
        self.du_obs = envmod.uav_obs_dim(cfg) if self.M else 0
        self.du_act = envmod.uav_action_dim(cfg) if self.M else 0
        self.db_obs = envmod.bs_obs_dim(cfg)
        self.db_act = envmod.bs_action_dim(cfg)
        self.state_dim = self.M * self.du_obs + self.db_obs
        self.action_dim = self.M * self.du_act + self.db_act

        ss = np.random.SeedSequence([tcfg.seed, 7])
        init_ss, self._noise_ss, self._sample_ss = ss.spawn(3)
        rng = np.random.default_rng(init_ss)
        ah, ch = tcfg.actor_hidden, tcfg.critic_hidden
        self.actors = [MlpNet(self.du_obs, ah, self.du_act, "sigmoid", rng) for _ in range(self.M)]
        self.bs_actor = MlpNet(self.db_obs, ah, self.db_act, "sigmoid", rng)
        self.locals = (
            [MlpNet(self.du_obs + self.du_act, ch, 1, "linear", rng) for _ in range(self.M)]
            if tcfg.local_critics
            else []
        )
        self.globals = [MlpNet(self.state_dim + self.action_dim, ch, 1, "linear", rng) for _ in range(2)]

        self.t_actors = [n.copy() for n in self.actors]
        self.t_bs_actor = self.bs_actor.copy()
        self.t_locals = [n.copy() for n in self.locals]
        self.t_globals = [n.copy() for n in self.globals]

        opt = tcfg.optimizer
        self.opt_actors = [make_optimizer(opt, n.params.count, tcfg.lr_actor) for n in self.actors]
        self.opt_bs = make_optimizer(opt, self.bs_actor.params.count, tcfg.lr_actor)
        self.opt_locals = [make_optimizer(opt, n.params.count, tcfg.lr_critic) for n in self.locals]
        self.opt_globals = [make_optimizer(opt, n.params.count, tcfg.lr_critic) for n in self.globals]

        self.buffer = ReplayBuffer(
            min(tcfg.buffer_capacity, max(1, tcfg.episodes * tcfg.iters_per_episode)),
            self.M, self.du_obs, self.du_act, self.db_obs, self.db_act,
        )
        self.iteration = 0
        self.aggregations = 0
        self.check_registry()

    # --- bookkeeping ---------------------------------------------------------

    def registry(self) -> dict:
        reg = {}
        for m in range(self.M):
            reg[f"actor_uav{m}"] = self.actors[m]
            reg[f"target_actor_uav{m}"] = self.t_actors[m]
        for m, (n, t) in enumerate(zip(self.locals, self.t_locals)):
            reg[f"local_critic_uav{m}"] = n
            reg[f"target_local_critic_uav{m}"] = t
        reg["actor_bs"] = self.bs_actor
        reg["target_actor_bs"] = self.t_bs_actor
        for i, (n, t) in enumerate(zip(self.globals, self.t_globals)):
            reg[f"global_critic{i + 1}"] = n
            reg[f"target_global_critic{i + 1}"] = t
        return reg

    def check_registry(self):
        n = len(self.registry())
        want = expected_network_count(self.M, self.tcfg.local_critics)
        if n != want:
            raise TrainingError(f"registry holds {n} networks, expected {want}")
        return n

    # --- acting --------------------------------------------------------------

    def act(self, obs_u, obs_b, noise=0.0, rng=None):
        a_u = np.array([self.actors[m].forward(obs_u[m]) for m in range(self.M)]).reshape(self.M, self.du_act)
        a_b = self.bs_actor.forward(obs_b)
        if noise > 0.0:
            a_u = np.clip(a_u + rng.normal(0.0, noise, a_u.shape), 0.0, 1.0)
            a_b = np.clip(a_b + rng.normal(0.0, noise, a_b.shape), 0.0, 1.0)
        return a_u, a_b

    def noise_at(self, episode):
        tc = self.tcfg
        if tc.episodes <= 1:
            return tc.noise_end
        frac = min(1.0, episode / (tc.episodes - 1))
        return tc.noise_start + (tc.noise_end - tc.noise_start) * frac

    # --- updates -------------------------------------------------------------

    def _joint(self, s_u, s_b, a_u, a_b):
        B = s_b.shape[0]
        return np.concatenate([s_u.reshape(B, -1), s_b, a_u.reshape(B, -1), a_b], axis=1)

    def targets(self, batch):
        tc = self.tcfg
        s2_u, s2_b = batch["s2_u"], batch["s2_b"]
        B = s2_b.shape[0]
        a2_u = np.stack([self.t_actors[m].forward(s2_u[:, m]) for m in range(self.M)], axis=1) if self.M else (
            np.zeros((B, 0, 0))
        )
        a2_b = self.t_bs_actor.forward(s2_b)
        X2 = self._joint(s2_u, s2_b, a2_u, a2_b)
        q_twin = np.stack([t.forward(X2)[:, 0] for t in self.t_globals])
        q_loc = np.array(
            [self.t_locals[m].forward(np.concatenate([s2_u[:, m], a2_u[:, m]], axis=1))[:, 0] for m in range(len(self.t_locals))]
        ).reshape(len(self.t_locals), B)
        r_l = batch["r_l"] if self.t_locals else np.zeros((B, 0))
        return critic_targets(batch["r_g"], r_l, q_twin, q_loc, tc.gamma)

    def _fit(self, net, opt, X, y, where):
        q, cache = net.forward_cache(X)
        err = q[:, 0] - y
        loss = float(np.mean(err * err))
        if not np.isfinite(loss) or loss > self.tcfg.loss_bound:
            raise TrainingError(
                f"{where}: loss {loss:.4g} exceeds bound {self.tcfg.loss_bound:.4g} at iteration {self.iteration} "
                f"(|y| max {np.max(np.abs(y)):.4g}, |q| max {np.max(np.abs(q)):.4g})"
            )
        grad, _ = net.backward(cache, (2.0 / len(y)) * err[:, None])
        grad_step(net, grad, opt, where)
        return loss

    def update_critics(self, batch):
        y_g, y_l = self.targets(batch)
        X = self._joint(batch["s_u"], batch["s_b"], batch["a_u"], batch["a_b"])
        losses = [self._fit(n, o, X, y_g, f"global critic {i + 1}")
                  for i, (n, o) in enumerate(zip(self.globals, self.opt_globals))]
        for m, (n, o) in enumerate(zip(self.locals, self.opt_locals)):
            Xl = np.concatenate([batch["s_u"][:, m], batch["a_u"][:, m]], axis=1)
            losses.append(self._fit(n, o, Xl, y_l[:, m], f"local critic {m}"))
        return float(np.mean(losses))

    def update_actors(self, batch):
        """Deterministic policy gradient step for every actor, then soft target updates.

        UAV actors follow the global-critic-1 gradient plus their local
        critic's; the BS actor follows the global term only.
        """
        s_u, s_b = batch["s_u"], batch["s_b"]
        B = s_b.shape[0]
        pi_u, caches = [], []
        for m in range(self.M):
            a, c = self.actors[m].forward_cache(s_u[:, m])
            pi_u.append(a)
            caches.append(c)
        pi_b, cache_b = self.bs_actor.forward_cache(s_b)
        a_u = np.stack(pi_u, axis=1) if self.M else np.zeros((B, 0, 0))
        X = self._joint(s_u, s_b, a_u, pi_b)
        g1 = self.globals[0]
        _, cg = g1.forward_cache(X)
        _, dX = g1.backward(cg, np.full((B, 1), 1.0 / B))
        dA = dX[:, self.state_dim :]
        for m in range(self.M):
            g = -dA[:, m * self.du_act : (m + 1) * self.du_act]
            if self.locals:
                _, cl = self.locals[m].forward_cache(np.concatenate([s_u[:, m], pi_u[m]], axis=1))
                _, dxl = self.locals[m].backward(cl, np.full((B, 1), 1.0 / B))
                g = g - dxl[:, self.du_obs :]
            grad, _ = self.actors[m].backward(caches[m], g)
            grad_step(self.actors[m], grad, self.opt_actors[m], f"UAV actor {m}")
        grad, _ = self.bs_actor.backward(cache_b, -dA[:, self.M * self.du_act :])
        grad_step(self.bs_actor, grad, self.opt_bs, "BS actor")

        tau = self.tcfg.tau
        for t, n in zip(self.t_actors, self.actors):
            soft_update(t, n, tau)
        soft_update(self.t_bs_actor, self.bs_actor, tau)
        for t, n in zip(self.t_locals, self.locals):
            soft_update(t, n, tau)

    def federate(self, events: fedavg.EventLog | None = None):
        """Average the UAV actors through the mixing matrix."""
        if self.M < 2:
            return
        mix = fedavg.MixMatrix(self.M, self.tcfg.fed_w)
        before_sets = [a.params.copy() for a in self.actors]
        new = fedavg.aggregate(before_sets, mix)
        for a, p in zip(self.actors, new):
            a.params.values[:] = p.values
        self.aggregations += 1
        if events is not None:
            events.add(self.iteration, mix.w, self.tcfg.fed_period, fedavg.max_spread(before_sets), fedavg.max_spread(new))

    def train_step(self, rng, events=None):
        tc = self.tcfg
        batch = self.buffer.sample(rng, tc.batch)
        self.iteration += 1
        loss = self.update_critics(batch)
        for t, n in zip(self.t_globals, self.globals):
            soft_update(t, n, tc.tau)
        if self.iteration % tc.policy_delay == 0:
            self.update_actors(batch)
        if self.mode == "frl" and fedavg.schedule(self.iteration, tc.fed_period):
            self.federate(events)
        return loss


def train(cfg: ScenarioConfig, tcfg: TrainerConfig, mode: str = "maddpg", on_episode=None) -> TrainResult:
    """Run the full interaction and update loop and return the trainer and its learning curve."""
    from ..accounting import overhead

    trainer = Trainer(cfg, tcfg, mode)
    res = TrainResult(trainer)
    exchange_bytes = overhead(cfg, mode, tcfg.actor_hidden).bytes
    if tcfg.iters_per_episode > cfg.n_slots:
        raise ValueError("iters_per_episode exceeds the episode length")
    noise_rng = np.random.default_rng(trainer._noise_ss)
    sample_rng = np.random.default_rng(trainer._sample_ss)
    env = envmod.Env(cfg)
    scale = tcfg.reward_scale
    M = trainer.M
    for ep in range(tcfg.episodes):
        obs_u, obs_b = env.reset(ep)
        sigma = trainer.noise_at(ep)
        ret = np.zeros(M + 1)
        losses = []
        violations = 0
        agg0 = trainer.aggregations
        for _ in range(tcfg.iters_per_episode):
            a_u, a_b = trainer.act(obs_u, obs_b, sigma, noise_rng)
            (obs2_u, obs2_b), rewards, rec, _ = env.step(a_u, a_b)
            violations += rec.violations
            ret += rewards
            r_l = rewards[:M]
            trainer.buffer.add(
                np.reshape(obs_u, (M, trainer.du_obs)), a_u, obs_b, a_b,
                scale * r_l, scale * rewards[M],
                np.reshape(obs2_u, (M, trainer.du_obs)), obs2_b,
            )
            obs_u, obs_b = obs2_u, obs2_b
            if len(trainer.buffer) >= max(tcfg.batch, tcfg.warmup):
                n_agg = trainer.aggregations
                losses.append(trainer.train_step(sample_rng, res.events))
                if mode == "maddpg" or trainer.aggregations > n_agg:
                    rec.bytes_overhead = exchange_bytes
            res.records.append(rec)
        mean_m, mean_b, obj = env.log.summary(cfg)
        row = [
            ep,
            float(ret[:M].mean()) if M else 0.0,
            float(ret[M]),
            mean_m,
            mean_b,
            obj,
            violations,
            float(np.mean(losses)) if losses else 0.0,
            trainer.aggregations - agg0,
        ]
        res.curve.append(row)
        if on_episode is not None:
            on_episode(row)
    if tcfg.episodes:
        res.trace = env.log.trace_rows()
    return res
