"""MDP view of the simulator: observations, action decoding, slot stepping.

Raw actions are vectors in [0, 1]. A UAV agent's vector is laid out as
``[psi scores (K*F) | power per backhaul subcarrier (L) | cpu (1) | vx, vy (2)]``;
the BS agent's as ``[zeta scores (M*L) | cpu share per UAV (M)]``. Without
UAVs the BS agent instead emits ``[psi scores (K*F) | cpu (1)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import age as agemod
from . import compute, kinematics, radio
from .scenario import LogicError, ScenarioConfig, Stage, World, new_scenario, refresh_channels, spawn_task

THRESHOLD = 0.5


class ActionError(ValueError):
    """Raw action vector with the wrong shape or non-finite entries."""


# --- layouts ---------------------------------------------------------------


def uav_action_dim(cfg: ScenarioConfig) -> int:
    return cfg.n_devices * cfg.n_access_sub + cfg.n_backhaul_sub + 3


def bs_action_dim(cfg: ScenarioConfig) -> int:
    if cfg.no_uav:
        return cfg.n_devices * cfg.n_access_sub + 1
    return cfg.n_uavs * cfg.n_backhaul_sub + cfg.n_uavs


UAV_OBS_PER_DEVICE = 5


def uav_obs_dim(cfg: ScenarioConfig) -> int:
    return UAV_OBS_PER_DEVICE * cfg.n_devices + 4


def bs_obs_dim(cfg: ScenarioConfig) -> int:
    if cfg.no_uav:
        return 4 * cfg.n_devices
    return 2 * cfg.n_devices + 2 * cfg.n_uavs * cfg.n_backhaul_sub + cfg.n_uavs


# --- types -----------------------------------------------------------------


@dataclass
class JointAction:
    """Binary schedule plus continuous allocations for one slot.

    ``psi`` is (R, K, F) with R the number of access receivers (the UAVs, or
    the BS alone without UAVs); ``j`` and ``f_bs`` are indexed by the same
    receivers because BS work is grouped by the UAV that forwarded it.
    """

    psi: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    j: np.ndarray
    power: np.ndarray
    f_uav: np.ndarray
    f_bs: np.ndarray
    vel: np.ndarray
    violations: np.ndarray
    interference: np.ndarray | None = None

    @classmethod
    def empty(cls, cfg: ScenarioConfig) -> "JointAction":
        K, M, F, L, R = cfg.n_devices, cfg.n_uavs, cfg.n_access_sub, cfg.n_backhaul_sub, cfg.n_receivers
        return cls(
            psi=np.zeros((R, K, F), dtype=bool),
            phi=np.zeros((M, K), dtype=bool),
            z=np.zeros((K, M), dtype=bool),
            zeta=np.zeros((M, L), dtype=bool),
            j=np.zeros((K, R), dtype=bool),
            power=np.zeros((M, L)),
            f_uav=np.zeros(M),
            f_bs=np.zeros(R),
            vel=np.zeros((M, 2)),
            violations=np.zeros(M + 1, dtype=np.int64),
        )


@dataclass
class MetricsRecord:
    episode: int
    slot: int
    mean_m: float
    mean_b: float
    objective: float
    rewards: np.ndarray
    violations: int
    bytes_overhead: float = 0.0

    def row(self) -> list:
        return (
            [self.episode, self.slot, repr(self.mean_m), repr(self.mean_b), repr(self.objective)]
            + [repr(float(r)) for r in self.rewards]
            + [self.violations, repr(float(self.bytes_overhead))]
        )

    @staticmethod
    def header(cfg: ScenarioConfig) -> list:
        agents = [f"reward_uav{m}" for m in range(cfg.n_uavs)] + ["reward_bs"]
        return ["episode", "slot", "mean_delta_m", "mean_delta_b", "objective"] + agents + [
            "violations",
            "bytes_overhead",
        ]


# --- observation -----------------------------------------------------------


def _db_scale(x, lo_db, hi_db):
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(np.maximum(x, 1e-300))
    return np.clip(2.0 * (db - lo_db) / (hi_db - lo_db) - 1.0, -1.0, 1.0)


def _gain_range_db(cfg: ScenarioConfig, height: float, margin_db: float = 0.0):
    hi = cfg.beta0 / height**2
    lo = cfg.beta0 / (height**2 + 2.0 * cfg.area_m**2)
    return 10 * np.log10(lo) - margin_db, 10 * np.log10(hi) + margin_db


def observe(world: World):
    """Per-UAV observation vectors and the BS observation vector."""
    cfg = world.cfg
    K = cfg.n_devices
    pending = (world.stage == Stage.AT_DEVICE).astype(np.float64)
    dev_x = world.dev_xy[:, 0] / cfg.area_m
    dev_y = world.dev_xy[:, 1] / cfg.area_m
    if cfg.no_uav:
        lo, hi = _gain_range_db(cfg, cfg.h_bs)
        g = _db_scale(world.access_gain[0], lo, hi)
        at_bs = (world.stage == Stage.AT_BS).astype(np.float64)
        bs = np.concatenate([world.delta_b / cfg.age_norm, at_bs, pending, g])
        return [], bs

    lo, hi = _gain_range_db(cfg, cfg.h_uav)
    g_all = _db_scale(world.access_gain, lo, hi)
    uav_obs = []
    for m in range(cfg.n_uavs):
        per = np.stack([world.delta_m / cfg.age_norm, g_all[m], dev_x, dev_y, pending], axis=1)
        per[~world.coverage[m]] = -1.0
        own = np.array(
            [
                world.uav_xy[m, 0] / cfg.area_m,
                world.uav_xy[m, 1] / cfg.area_m,
                world.uav_vel[m, 0] / cfg.v_max,
                world.uav_vel[m, 1] / cfg.v_max,
            ]
        )
        uav_obs.append(np.concatenate([per.ravel(), own]))

    hb_lo, hb_hi = _gain_range_db(cfg, abs(cfg.h_uav - cfg.h_bs), margin_db=10.0)
    hsq = _db_scale(world.backhaul_hsq, hb_lo, hb_hi).ravel()
    interf = np.clip(np.log10(1.0 + world.interference / cfg.noise_power) / 10.0, 0.0, 1.0).ravel()
    at_bs = (world.stage == Stage.AT_BS).astype(np.float64)
    ready = np.array(
        [np.sum((world.stage == Stage.UAV_DONE) & (world.uav_of == m)) for m in range(cfg.n_uavs)],
        dtype=np.float64,
    ) / max(K, 1)
    bs = np.concatenate([world.delta_b / cfg.age_norm, at_bs, hsq, interf, ready])
    return uav_obs, bs


# --- decoding --------------------------------------------------------------


def _check_raw(raw, shape, who):
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape != shape:
        raise ActionError(f"{who} action has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ActionError(f"{who} action contains non-finite entries")
    return np.clip(arr, 0.0, 1.0)


def _task_age(world: World) -> np.ndarray:
    return world.t - world.t_gen


def _age_order(world: World, mask: np.ndarray) -> list:
    idx = np.flatnonzero(mask)
    ages = _task_age(world)[idx]
    return [int(i) for i in idx[np.lexsort((idx, -ages))]]


def decode_actions(world: World, raw_uav, raw_bs) -> JointAction:
    """Turn relaxed agent outputs into a schedule that satisfies every hard constraint.

    Requests that would break a one-slot time bound are dropped and counted
    as violations against the agent that made them.
    """
    cfg = world.cfg
    K, M, F, L, R = cfg.n_devices, cfg.n_uavs, cfg.n_access_sub, cfg.n_backhaul_sub, cfg.n_receivers
    raw_uav = _check_raw(raw_uav, (M, uav_action_dim(cfg)), "UAV")
    raw_bs = _check_raw(raw_bs, (bs_action_dim(cfg),), "BS")
    ja = JointAction.empty(cfg)
    bs_agent = M

    # access assignment
    if cfg.no_uav:
        scores = raw_bs[: K * F].reshape(1, K, F)
    else:
        scores = raw_uav[:, : K * F].reshape(M, K, F)
    rates = radio.access_rate_matrix(world.access_gain, cfg.rho_dev, cfg.noise_power, cfg.access_bw)
    d_cur = world.cur_d()
    waiting = world.stage == Stage.AT_DEVICE
    cand = np.argwhere((scores >= THRESHOLD) & waiting[None, :, None] & world.coverage[:, :, None])
    if len(cand):
        s = scores[cand[:, 0], cand[:, 1], cand[:, 2]]
        order = np.lexsort((cand[:, 2], cand[:, 0], cand[:, 1], -s))
        taken_dev = set()
        taken_ch = set()
        for r, k, f in cand[order]:
            if k in taken_dev or (r, f) in taken_ch:
                continue
            if radio.upload_time(d_cur[k], 1, rates[r, k]) > cfg.slot_ms:
                ja.violations[bs_agent if cfg.no_uav else r] += 1
                continue
            ja.psi[r, k, f] = True
            taken_dev.add(k)
            taken_ch.add((r, f))

    lam = cfg.lam
    f_cur = world.cur_f()
    res_cur = world.cur_res()

    if not cfg.no_uav:
        # backhaul subcarriers: top-L_l scores per subcarrier
        zscore = raw_bs[: M * L].reshape(M, L)
        for l in range(L):
            order = np.lexsort((np.arange(M), -zscore[:, l]))
            keep = [m for m in order if zscore[m, l] >= THRESHOLD][: cfg.uavs_per_backhaul_sub]
            ja.zeta[keep, l] = True
        p = raw_uav[:, K * F : K * F + L] * cfg.p_max * ja.zeta
        tot = p.sum(axis=1)
        over = tot > cfg.p_max
        p[over] *= (cfg.p_max / tot[over])[:, None]
        ja.power = p
        ja.f_uav = raw_uav[:, K * F + L] * cfg.f_uav_max
        ja.vel = (2.0 * raw_uav[:, K * F + L + 1 : K * F + L + 3] - 1.0) * cfg.v_max
        shares = raw_bs[M * L : M * L + M]
        ja.f_bs = cfg.f_bs_max * shares / max(1.0, float(shares.sum()))
    else:
        ja.f_bs = np.array([raw_bs[K * F] * cfg.f_bs_max])

    _fill_pipeline(world, ja, lam, d_cur, f_cur, res_cur)
    return ja


def _fill_pipeline(world, ja, lam, d_cur, f_cur, res_cur):
    """Age-greedy selection of UAV processing, forwarding and BS processing."""
    cfg = world.cfg
    M = cfg.n_uavs
    bs_agent = M
    limit = cfg.slot_ms
    if not cfg.no_uav:
        rates, _, interf = radio.backhaul_rates(
            world.backhaul_hsq, ja.power, ja.zeta, cfg.noise_power, cfg.backhaul_bw, cfg.sinr_literal_power
        )
        ja.interference = interf
        for m in range(M):
            here = world.uav_of == m
            order = _age_order(world, here & (world.stage == Stage.AT_UAV))
            f_m = ja.f_uav[m]

            def t_uav(sel, f_m=f_m):
                mask = np.zeros(cfg.n_devices, dtype=bool)
                mask[sel] = True
                return compute.uav_exec_time(mask, lam, d_cur, f_cur, f_m)

            chosen, stalled = compute.age_greedy_fill(order, t_uav, limit)
            ja.phi[m, chosen] = True
            if stalled and f_m > 0:
                ja.violations[m] += 1

            order = _age_order(world, here & (world.stage == Stage.UAV_DONE))
            zrow = ja.zeta[m]
            rate = rates[m]

            def t_fw(sel, zrow=zrow, rate=rate):
                mask = np.zeros(cfg.n_devices, dtype=bool)
                mask[sel] = True
                return radio.backhaul_time(res_cur, mask, zrow, rate)

            chosen, stalled = compute.age_greedy_fill(order, t_fw, limit)
            ja.z[chosen, m] = True
            if stalled and zrow.any():
                ja.violations[m] += 1
    else:
        ja.interference = np.zeros((0, cfg.n_backhaul_sub))

    for r in range(cfg.n_receivers):
        order = _age_order(world, (world.uav_of == r) & (world.stage == Stage.AT_BS))
        f_r = ja.f_bs[r]

        def t_bs(sel, f_r=f_r):
            mask = np.zeros(cfg.n_devices, dtype=bool)
            mask[sel] = True
            return compute.bs_exec_time(mask, lam, d_cur, f_cur, f_r)

        chosen, stalled = compute.age_greedy_fill(order, t_bs, limit)
        ja.j[chosen, r] = True
        if stalled and f_r > 0:
            ja.violations[bs_agent] += 1


def check_feasible(world: World, ja: JointAction) -> list:
    """List every hard-constraint breach of a decoded action (empty when feasible)."""
    cfg = world.cfg
    problems = []
    limit = cfg.slot_ms * (1 + 1e-12)
    per_dev = ja.psi.sum(axis=(0, 2))
    if np.any(per_dev > 1):
        problems.append("device scheduled more than once")
    if np.any(ja.psi.sum(axis=1) > 1):
        problems.append("access subcarrier shared")
    if ja.zeta.size and np.any(ja.zeta.sum(axis=0) > cfg.uavs_per_backhaul_sub):
        problems.append("backhaul subcarrier over-assigned")
    if ja.power.size and np.any((ja.power * ja.zeta).sum(axis=1) > cfg.p_max * (1 + 1e-12)):
        problems.append("UAV power budget exceeded")
    rates = radio.access_rate_matrix(world.access_gain, cfg.rho_dev, cfg.noise_power, cfg.access_bw)
    d_cur, f_cur, res_cur, lam = world.cur_d(), world.cur_f(), world.cur_res(), cfg.lam
    for r, k, f in np.argwhere(ja.psi):
        if world.stage[k] != Stage.AT_DEVICE or not world.coverage[r, k]:
            problems.append(f"device {k} cannot upload")
        elif radio.upload_time(d_cur[k], 1, rates[r, k]) > limit:
            problems.append(f"upload of device {k} exceeds the slot")
    if not cfg.no_uav:
        bh, _, _ = radio.backhaul_rates(
            world.backhaul_hsq, ja.power, ja.zeta, cfg.noise_power, cfg.backhaul_bw, cfg.sinr_literal_power
        )
        for m in range(cfg.n_uavs):
            if np.any(ja.phi[m] & ~((world.stage == Stage.AT_UAV) & (world.uav_of == m))):
                problems.append(f"UAV {m} processes a task it does not hold")
            if compute.uav_exec_time(ja.phi[m], lam, d_cur, f_cur, ja.f_uav[m]) > limit:
                problems.append(f"UAV {m} processing exceeds the slot")
            if np.any(ja.z[:, m] & ~((world.stage == Stage.UAV_DONE) & (world.uav_of == m))):
                problems.append(f"UAV {m} forwards a task that is not ready")
            if radio.backhaul_time(res_cur, ja.z[:, m], ja.zeta[m], bh[m]) > limit:
                problems.append(f"UAV {m} backhaul exceeds the slot")
        if np.any(ja.f_uav > cfg.f_uav_max * (1 + 1e-12)):
            problems.append("UAV CPU above capacity")
    for r in range(cfg.n_receivers):
        if np.any(ja.j[:, r] & ~((world.stage == Stage.AT_BS) & (world.uav_of == r))):
            problems.append(f"BS processes group-{r} task that is not there")
        if compute.bs_exec_time(ja.j[:, r], lam, d_cur, f_cur, ja.f_bs[r]) > limit:
            problems.append(f"BS processing of group {r} exceeds the slot")
    if ja.f_bs.sum() > cfg.f_bs_max * (1 + 1e-12):
        problems.append("BS CPU above capacity")
    return problems


# --- stepping --------------------------------------------------------------


def served_mask(world: World) -> np.ndarray:
    """(M, K): devices attributed to each UAV's reward.

    A UAV answers for the devices it covers; devices nobody covers are
    charged to every UAV.
    """
    cov = world.coverage
    orphan = ~cov.any(axis=0)
    return cov | orphan[None, :]


def step(world: World, ja: JointAction):
    """Advance ``world`` by one slot under a decoded action.

    Returns ``(observations, rewards, record, info)`` where ``rewards`` holds
    one entry per UAV followed by the BS entry.
    """
    cfg = world.cfg
    K, M = cfg.n_devices, cfg.n_uavs
    t = world.t
    stage0 = world.stage.copy()
    violations = ja.violations.astype(np.int64).copy()

    def rec(k):
        return world.records[world.cur_rec[k]]

    uploaded = ja.psi.any(axis=(0, 2))
    for k in np.flatnonzero(uploaded):
        if stage0[k] != Stage.AT_DEVICE:
            raise LogicError(f"device {k} uploaded from stage {Stage(stage0[k]).name}")
        r = int(np.argwhere(ja.psi[:, k, :])[0][0])
        world.stage[k] = Stage.AT_BS if cfg.no_uav else Stage.AT_UAV
        world.uav_of[k] = r
        rec(k).upload = t
        rec(k).uav = r
    for m, k in np.argwhere(ja.phi):
        if stage0[k] != Stage.AT_UAV or world.uav_of[k] != m:
            raise LogicError(f"UAV {m} cannot process device {k}'s task")
        world.stage[k] = Stage.UAV_DONE
        rec(k).uav_proc = t
    forwarded = ja.z.any(axis=1)
    for k, m in np.argwhere(ja.z):
        if stage0[k] != Stage.UAV_DONE or world.uav_of[k] != m:
            raise LogicError(f"UAV {m} cannot forward device {k}'s task")
        world.stage[k] = Stage.AT_BS
        rec(k).forward = t
    for k, r in np.argwhere(ja.j):
        if stage0[k] != Stage.AT_BS or world.uav_of[k] != r:
            raise LogicError(f"BS cannot finish device {k}'s task")
        world.stage[k] = Stage.DONE
        rec(k).done = t

    new = agemod.tick(
        agemod.AgeState(world.delta0, world.delta_m, world.delta_b),
        stage0,
        uploaded,
        forwarded,
        no_uav=cfg.no_uav,
    )
    world.delta0, world.delta_m, world.delta_b = new.delta0, new.delta_m, new.delta_b

    served = served_mask(world) if M else np.zeros((0, K), dtype=bool)
    world.t = t + 1
    for k in np.flatnonzero(world.stage == Stage.DONE):
        spawn_task(world, int(k), t + 1)

    if M:
        world.interference = ja.interference if ja.interference is not None else np.zeros_like(world.interference)
        if not cfg.frozen:
            new_xy, disp, flags = kinematics.apply_move(world.uav_xy, ja.vel, cfg.v_max, cfg.area_m, cfg.d_min)
            world.uav_xy = new_xy
            world.uav_vel = disp
            violations[:M] += flags
    refresh_channels(world)

    pen = cfg.violation_penalty
    rewards = np.empty(M + 1)
    for m in range(M):
        rewards[m] = -cfg.k1 * float(world.delta_m[served[m]].sum()) - pen * violations[m]
    rewards[M] = -cfg.k2 * float(world.delta_b.sum()) - pen * violations[M]

    mean_m = float(world.delta_m.mean())
    mean_b = float(world.delta_b.mean())
    record = MetricsRecord(
        episode=world.episode,
        slot=t,
        mean_m=mean_m,
        mean_b=mean_b,
        objective=cfg.k1 * mean_m + cfg.k2 * mean_b,
        rewards=rewards,
        violations=int(violations.sum()),
    )
    info = {"violations": violations, "uploaded": uploaded, "forwarded": forwarded}
    return observe(world), rewards, record, info


# --- episode driver ----------------------------------------------------------


@dataclass
class EpisodeLog:
    records: list = field(default_factory=list)
    delta0: list = field(default_factory=list)
    delta_m: list = field(default_factory=list)
    delta_b: list = field(default_factory=list)
    stage: list = field(default_factory=list)

    def summary(self, cfg: ScenarioConfig):
        return agemod.mean_aoi(np.array(self.delta_m), np.array(self.delta_b), cfg.k1, cfg.k2)

    def trace_rows(self):
        """Per-slot AoI trace rows: slot, device, delta0, deltaM, deltaB, stage."""
        rows = []
        for t, (d0, dm, db, st) in enumerate(zip(self.delta0, self.delta_m, self.delta_b, self.stage)):
            for k in range(len(d0)):
                rows.append([t + 1, k, int(d0[k]), int(dm[k]), int(db[k]), Stage(int(st[k])).name])
        return rows


class Env:
    """Episode wrapper around a :class:`World` for agents and baselines."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.world: World | None = None
        self.log = EpisodeLog()

    def reset(self, episode: int = 0):
        self.world = new_scenario(self.cfg, episode)
        self.log = EpisodeLog()
        return observe(self.world)

    @property
    def done(self) -> bool:
        return self.world.t >= self.cfg.n_slots

    def step_joint(self, ja: JointAction):
        obs, rewards, record, info = step(self.world, ja)
        w = self.world
        self.log.records.append(record)
        self.log.delta0.append(w.delta0.copy())
        self.log.delta_m.append(w.delta_m.copy())
        self.log.delta_b.append(w.delta_b.copy())
        self.log.stage.append(w.stage.copy())
        return obs, rewards, record, info

    def step(self, raw_uav, raw_bs):
        ja = decode_actions(self.world, raw_uav, raw_bs)
        return self.step_joint(ja)
