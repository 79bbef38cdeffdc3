"""Hand-written policies, the exhaustive oracle for tiny frozen instances, and scenario variants.

Policies map the current :class:`World` to the raw action vectors the
learned agents would emit, so every policy goes through the same decoder.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import compute, radio
from .env import THRESHOLD, Env, JointAction, bs_action_dim, uav_action_dim
from .scenario import ConfigError, ScenarioConfig, Stage, World, new_scenario

KINDS = ("random", "round_robin", "greedy_max_age", "no_uav", "oracle")
ORACLE_LIMITS = {"n_devices": 3, "n_uavs": 2, "n_slots": 8}


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; choose from {KINDS}")


def check_oracle_limits(cfg: ScenarioConfig):
    for key, cap in ORACLE_LIMITS.items():
        if getattr(cfg, key) > cap:
            raise ConfigError(f"oracle limited to {key} <= {cap}, got {getattr(cfg, key)}")


# --- policies ----------------------------------------------------------------


class RandomPolicy:
    def __init__(self, cfg, seed=0):
        self.cfg, self.seed = cfg, seed
        self.reset(0)

    def reset(self, episode):
        self.rng = np.random.default_rng(np.random.SeedSequence([self.seed, 3, episode]))

    def act(self, world: World):
        cfg = self.cfg
        return self.rng.random((cfg.n_uavs, uav_action_dim(cfg))), self.rng.random(bs_action_dim(cfg))


def _blank(cfg):
    """Neutral raw actions: nothing scheduled, zero power and CPU, hover."""
    raw_u = np.zeros((cfg.n_uavs, uav_action_dim(cfg)))
    K, F, L = cfg.n_devices, cfg.n_access_sub, cfg.n_backhaul_sub
    raw_u[:, K * F + L + 1 :] = 0.5
    return raw_u, np.zeros(bs_action_dim(cfg))


def _zeta_groups(ranked, cfg):
    """Spread ranked UAVs over backhaul subcarriers, at most ``uavs_per_backhaul_sub`` each."""
    n = len(ranked)
    groups = []
    for l in range(cfg.n_backhaul_sub):
        if n == 0:
            groups.append([])
            continue
        members = [ranked[(l * cfg.uavs_per_backhaul_sub + i) % n] for i in range(min(cfg.uavs_per_backhaul_sub, n))]
        groups.append(sorted(set(members)))
    return groups


class RoundRobinPolicy:
    """Fixed cyclic order: devices ascending, UAVs ascending, cursor per episode."""

    def __init__(self, cfg, seed=0):
        self.cfg = cfg
        self.reset(0)

    def reset(self, episode):
        self.cursor = 0

    def act(self, world: World):
        cfg = self.cfg
        K, M, F, L = cfg.n_devices, cfg.n_uavs, cfg.n_access_sub, cfg.n_backhaul_sub
        raw_u, raw_b = _blank(cfg)
        order = [(self.cursor + i) % K for i in range(K)] if K else []
        if cfg.no_uav:
            for slot, k in enumerate(order[:F]):
                raw_b[k * F + slot] = 1.0
            raw_b[K * F] = 1.0
        else:
            free = [list(range(F)) for _ in range(M)]
            for k in order:
                for m in range(M):
                    if world.coverage[m, k] and free[m]:
                        raw_u[m, k * F + free[m].pop(0)] = 1.0
                        break
            raw_u[:, K * F : K * F + L + 1] = 1.0
            ranked = [(self.cursor + i) % M for i in range(M)]
            for l, members in enumerate(_zeta_groups(ranked, cfg)):
                raw_b[np.array(members, dtype=int) * L + l] = 1.0
            raw_b[M * L :] = 1.0
        self.cursor = (self.cursor + 1) % max(K, 1)
        return raw_u, raw_b


class GreedyMaxAgePolicy:
    """Serve the oldest feasible work first at every hop.

    Uploads go to the covering receiver with the best rate that still has a
    free subcarrier. Each UAV runs at full CPU and splits its full power
    evenly over its backhaul subcarriers; BS CPU is split evenly among the
    UAV groups that have work waiting at the BS. Resources are withheld from
    nodes where no single task can finish in the slot, so the decoder never
    records a violation on a fading-free instance.
    """

    def __init__(self, cfg, seed=0):
        self.cfg = cfg

    def reset(self, episode):
        pass

    def act(self, world: World):
        cfg = self.cfg
        K, M, F, L, R = cfg.n_devices, cfg.n_uavs, cfg.n_access_sub, cfg.n_backhaul_sub, cfg.n_receivers
        raw_u, raw_b = _blank(cfg)
        age = world.t - world.t_gen
        d, f, res, lam = world.cur_d(), world.cur_f(), world.cur_res(), cfg.lam
        rates = radio.access_rate_matrix(world.access_gain, cfg.rho_dev, cfg.noise_power, cfg.access_bw)

        waiting = [k for k in np.lexsort((np.arange(K), -age)) if world.stage[k] == Stage.AT_DEVICE]
        free = [list(range(F)) for _ in range(R)]
        n = len(waiting)
        for rank, k in enumerate(waiting):
            score = 1.0 - 0.5 * rank / max(n, 1)
            for r in np.lexsort((np.arange(R), -rates[:, k])):
                if world.coverage[r, k] and free[r] and radio.upload_time(d[k], 1, rates[r, k]) <= cfg.slot_ms:
                    col = k * F + free[r].pop(0)
                    if cfg.no_uav:
                        raw_b[col] = score
                    else:
                        raw_u[r, col] = score
                    break

        if cfg.no_uav:
            ready = world.stage == Stage.AT_BS
            raw_b[K * F] = float(self._fits(ready, lambda sel: compute.bs_exec_time(sel, lam, d, f, cfg.f_bs_max)))
            return raw_u, raw_b

        for m in range(M):
            held = (world.stage == Stage.AT_UAV) & (world.uav_of == m)
            raw_u[m, K * F + L] = float(self._fits(held, lambda sel: compute.uav_exec_time(sel, lam, d, f, cfg.f_uav_max)))

        # backhaul: UAVs with forwardable work, oldest first; drop the youngest
        # until every remaining UAV can move at least one task
        ready = [(world.stage == Stage.UAV_DONE) & (world.uav_of == m) for m in range(M)]
        cand = [m for m in range(M) if np.any(ready[m])]
        cand.sort(key=lambda m: (-int(age[ready[m]].max()), m))
        while cand:
            zeta = np.zeros((M, L), dtype=bool)
            for l, members in enumerate(_zeta_groups(cand, cfg)):
                zeta[members, l] = True
            bh, _, _ = radio.backhaul_rates(
                world.backhaul_hsq, even_power(zeta, cfg.p_max), zeta, cfg.noise_power, cfg.backhaul_bw,
                cfg.sinr_literal_power,
            )
            bad = [m for m in cand if not self._fits(ready[m], lambda sel, m=m: radio.backhaul_time(res, sel, zeta[m], bh[m]))]
            if not bad:
                break
            cand = [m for m in cand if m != bad[-1]]
        if cand:
            raw_u[:, K * F : K * F + L] = 1.0
            raw_b[: M * L] = zeta.ravel().astype(float)

        # BS CPU: even split over the groups that can finish something with it
        groups = [(world.stage == Stage.AT_BS) & (world.uav_of == r) for r in range(M)]
        busy = [r for r in range(M) if np.any(groups[r])]
        while busy:
            share = cfg.f_bs_max / len(busy)
            bad = [r for r in busy if not self._fits(groups[r], lambda sel: compute.bs_exec_time(sel, lam, d, f, share))]
            if not bad:
                break
            busy = [r for r in busy if r != bad[-1]]
        raw_b[M * L + np.array(busy, dtype=int)] = 1.0
        return raw_u, raw_b

    def _fits(self, mask, time_of):
        """True when some single task in ``mask`` finishes within the slot."""
        for k in np.flatnonzero(mask):
            sel = np.zeros(mask.shape, dtype=bool)
            sel[k] = True
            if time_of(sel) <= self.cfg.slot_ms:
                return True
        return False


def even_power(zeta, p_max):
    counts = zeta.sum(axis=1, keepdims=True)
    return np.where(zeta, p_max / np.maximum(counts, 1), 0.0)


def make_policy(spec: PolicySpec, cfg: ScenarioConfig):
    if spec.kind == "random":
        return RandomPolicy(cfg, spec.seed)
    if spec.kind == "round_robin":
        return RoundRobinPolicy(cfg, spec.seed)
    if spec.kind == "greedy_max_age":
        return GreedyMaxAgePolicy(cfg, spec.seed)
    if spec.kind == "no_uav":
        return GreedyMaxAgePolicy(no_uav_scenario(cfg), spec.seed)
    raise ValueError("the oracle is not a slot-by-slot policy; use oracle_schedule")


def act(policy, world: World):
    """Raw action vectors of ``policy`` for the world's current slot."""
    return policy.act(world)


def run_policy(cfg: ScenarioConfig, spec: PolicySpec, episode: int = 0, env: Env | None = None):
    """Roll out one episode and return the env (holding its log)."""
    if spec.kind == "no_uav":
        cfg = no_uav_scenario(cfg)
        spec = PolicySpec("greedy_max_age", spec.seed)
    pol = make_policy(spec, cfg)
    env = env or Env(cfg)
    env.reset(episode)
    pol.reset(episode)
    while not env.done:
        raw_u, raw_b = pol.act(env.world)
        env.step(raw_u, raw_b)
    return env


# --- variants ----------------------------------------------------------------


def no_uav_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Devices upload straight to the BS, which runs every cycle."""
    return cfg.replace(no_uav=True, n_uavs=0, lambda_k=0.0)


def ofdma_backhaul_variant(cfg: ScenarioConfig) -> ScenarioConfig:
    """One UAV per backhaul subcarrier: no SIC, no co-channel interference."""
    return cfg.replace(uavs_per_backhaul_sub=1)


# --- exhaustive oracle ----------------------------------------------------------


class SearchLimitError(RuntimeError):
    """The oracle's state budget was exhausted."""


def _subsets(items):
    for n in range(len(items) + 1):
        yield from itertools.combinations(items, n)


class _Oracle:
    def __init__(self, cfg: ScenarioConfig, episode: int, max_states: int):
        self.cfg = cfg
        self.w0 = new_scenario(cfg, episode)
        w = self.w0
        self.rates = radio.access_rate_matrix(w.access_gain, cfg.rho_dev, cfg.noise_power, cfg.access_bw)
        self.coverage = w.coverage
        self.hsq = w.backhaul_hsq
        self.max_states = max_states
        self.memo = {}
        self.lam = cfg.lam
        self.weights = (cfg.k1, cfg.k2)
        self._bh_cache = {}
        self._fit_cache = {}
        self._action_cache = {}

    # task properties
    def _props(self, idx):
        w = self.w0
        K = self.cfg.n_devices
        d = np.array([w.task_d[k, idx[k]] for k in range(K)])
        f = np.array([w.task_f[k, idx[k]] for k in range(K)])
        r = np.array([w.task_res[k, idx[k]] for k in range(K)])
        return d, f, r

    def _backhaul(self, zeta_key):
        if zeta_key not in self._bh_cache:
            cfg = self.cfg
            zeta = np.array(zeta_key, dtype=bool).reshape(cfg.n_uavs, cfg.n_backhaul_sub)
            power = even_power(zeta, cfg.p_max)
            rates, _, interf = radio.backhaul_rates(
                self.hsq, power, zeta, cfg.noise_power, cfg.backhaul_bw, cfg.sinr_literal_power
            )
            self._bh_cache[zeta_key] = (zeta, power, rates, interf)
        return self._bh_cache[zeta_key]

    def _zeta_options(self, fw_uavs):
        cfg = self.cfg
        M, L = cfg.n_uavs, cfg.n_backhaul_sub
        if not fw_uavs:
            yield (False,) * (M * L)
            return
        cols = [c for c in _subsets(fw_uavs) if len(c) <= cfg.uavs_per_backhaul_sub]
        for choice in itertools.product(cols, repeat=L):
            z = np.zeros((M, L), dtype=bool)
            for l, members in enumerate(choice):
                z[list(members), l] = True
            yield tuple(z.ravel())

    def _fits(self, key, subset, idx, time_of):
        """Cached one-slot check; ``key`` names the node and its resources."""
        ck = (key, tuple((k, idx[k]) for k in subset))
        hit = self._fit_cache.get(ck)
        if hit is None:
            mask = np.zeros(self.cfg.n_devices, dtype=bool)
            mask[list(subset)] = True
            hit = self._fit_cache[ck] = time_of(mask) <= self.cfg.slot_ms
        return hit

    def _actions(self, state):
        """Yield one representative joint action per distinct selection outcome.

        Backhaul subcarrier sets and BS CPU splits only matter through the
        forwarding and BS selections they make feasible, so each reachable
        selection is kept once with the first allocation that allows it.
        """
        cfg = self.cfg
        stage, uav_of, idx = state[1], state[2], state[3]
        K, M, F, R = cfg.n_devices, cfg.n_uavs, cfg.n_access_sub, cfg.n_receivers
        d, f, res = self._props(idx)
        lam, slot = self.lam, cfg.slot_ms

        up_opts = []
        for k in range(K):
            opts = [None]
            if stage[k] == Stage.AT_DEVICE:
                opts += [r for r in range(R) if self.coverage[r, k]
                         and radio.upload_time(d[k], 1, self.rates[r, k]) <= slot]
            up_opts.append(opts)
        uploads = [u for u in itertools.product(*up_opts) if all(u.count(r) <= F for r in range(R))]

        phi_opts = []
        for m in range(M):
            held = [k for k in range(K) if stage[k] == Stage.AT_UAV and uav_of[k] == m]
            phi_opts.append([sub for sub in _subsets(held)
                             if self._fits(("uav", m), sub, idx, lambda x: compute.uav_exec_time(x, lam, d, f, cfg.f_uav_max))])
        phis = list(itertools.product(*phi_opts))

        ready = [[k for k in range(K) if stage[k] == Stage.UAV_DONE and uav_of[k] == m] for m in range(M)]
        z_out = {}
        for zkey in self._zeta_options([m for m in range(M) if ready[m]]):
            zeta, _, bh, _ = self._backhaul(zkey)
            z_opts = []
            for m in range(M):
                z_opts.append([sub for sub in _subsets(ready[m])
                               if self._fits(("bh", m, zkey), sub, idx,
                                             lambda x, m=m: radio.backhaul_time(res, x, zeta[m], bh[m]))])
            for z in itertools.product(*z_opts):
                z_out.setdefault(z, zkey)

        groups = [[k for k in range(K) if stage[k] == Stage.AT_BS and uav_of[k] == r] for r in range(R)]
        j_out = {}
        for funded in _subsets([r for r in range(R) if groups[r]]):
            f_bs = np.zeros(R)
            f_bs[list(funded)] = cfg.f_bs_max / max(1, len(funded))
            j_opts = []
            for r in range(R):
                j_opts.append([sub for sub in _subsets(groups[r])
                               if self._fits(("bs", r, funded), sub, idx,
                                             lambda x, r=r: compute.bs_exec_time(x, lam, d, f, f_bs[r]))])
            for j in itertools.product(*j_opts):
                j_out.setdefault(j, tuple(f_bs))

        for up in uploads:
            for phi in phis:
                for z, zkey in z_out.items():
                    for j, f_bs in j_out.items():
                        yield (up, phi, zkey, z, j, f_bs)

    def _next(self, state, action):
        """Successor state and the post-slot age sums, written out independently of the env."""
        no_uav = self.cfg.no_uav
        t, stage, uav_of, idx, tgen, d0, dm, db = state
        up, phi, _, z, j, _ = action
        st, uo, ix, tg = list(stage), list(uav_of), list(idx), list(tgen)
        fw = [False] * len(st)
        for k, r in enumerate(up):
            if r is not None:
                st[k] = Stage.AT_BS if no_uav else Stage.AT_UAV
                uo[k] = r
        for sub in phi:
            for k in sub:
                st[k] = Stage.UAV_DONE
        for sub in z:
            for k in sub:
                st[k] = Stage.AT_BS
                fw[k] = True
        for sub in j:
            for k in sub:
                st[k] = Stage.DONE
        n0, nm, nb = [], [], []
        for k in range(len(st)):
            sent = up[k] is not None
            n0.append(d0[k] + int(stage[k] == Stage.AT_DEVICE and not sent))
            if no_uav:
                nm.append(dm[k])
                nb.append(d0[k] + 1 if sent else db[k] + 1)
            else:
                nm.append(d0[k] + 1 if sent else dm[k] + 1)
                nb.append(dm[k] + 1 if fw[k] else db[k] + 1)
            if st[k] == Stage.DONE:
                st[k], uo[k], ix[k], tg[k], n0[k] = int(Stage.AT_DEVICE), -1, ix[k] + 1, t + 1, 0
        nxt = (t + 1, tuple(int(s) for s in st), tuple(uo), tuple(ix), tuple(tg), tuple(n0), tuple(nm), tuple(nb))
        return nxt, sum(nm), sum(nb)

    def best(self, state):
        """Minimum remaining weighted age sum from ``state``; returns (cost, sum_m, sum_b, action)."""
        if state[0] >= self.cfg.n_slots:
            return 0.0, 0, 0, None
        hit = self.memo.get(state)
        if hit is not None:
            return hit
        if len(self.memo) >= self.max_states:
            raise SearchLimitError(f"oracle explored more than {self.max_states} states")
        k1, k2 = self.weights
        seen = {}
        skey = state[1:4]
        actions = self._action_cache.get(skey)
        if actions is None:
            actions = self._action_cache[skey] = list(self._actions(state))
        for action in actions:
            nxt, sm, sb = self._next(state, action)
            if nxt not in seen:
                seen[nxt] = (sm, sb, action)
        best = None
        for nxt, (sm, sb, action) in seen.items():
            c, rm, rb, _ = self.best(nxt)
            tm, tb = sm + rm, sb + rb
            cost = k1 * tm + k2 * tb
            if best is None or cost < best[0]:
                best = (cost, tm, tb, (action, nxt))
        self.memo[state] = best
        return best

    def to_joint(self, state, action) -> JointAction:
        cfg = self.cfg
        up, phi, zkey, z, j, f_bs = action
        ja = JointAction.empty(cfg)
        used = [0] * cfg.n_receivers
        for k, r in enumerate(up):
            if r is not None:
                ja.psi[r, k, used[r]] = True
                used[r] += 1
        for m, sub in enumerate(phi):
            ja.phi[m, list(sub)] = True
        for m, sub in enumerate(z):
            ja.z[list(sub), m] = True
        for r, sub in enumerate(j):
            ja.j[list(sub), r] = True
        if cfg.n_uavs:
            zeta, power, _, interf = self._backhaul(zkey)
            ja.zeta = zeta.copy()
            ja.power = power.copy()
            ja.interference = interf.copy()
            ja.f_uav = np.full(cfg.n_uavs, cfg.f_uav_max)
        else:
            ja.interference = np.zeros((0, cfg.n_backhaul_sub))
        ja.f_bs = np.array(f_bs, dtype=float)
        return ja

    def initial_state(self):
        w = self.w0
        return (
            0,
            tuple(int(s) for s in w.stage),
            tuple(int(u) for u in w.uav_of),
            tuple(int(i) for i in w.task_idx),
            tuple(int(g) for g in w.t_gen),
            tuple(int(a) for a in w.delta0),
            tuple(int(a) for a in w.delta_m),
            tuple(int(a) for a in w.delta_b),
        )


def oracle_schedule(cfg: ScenarioConfig, episode: int = 0, max_states: int = 2_000_000):
    """Exhaustive minimum-objective schedule on a tiny frozen instance.

    Mobility and fading are frozen. Every binary selection is enumerated;
    continuous resources follow a fixed rule: full UAV CPU, full UAV power
    split evenly over its backhaul subcarriers, and BS CPU split evenly over
    an enumerated subset of the UAV groups with work waiting at the BS.

    Returns ``(objective, schedule)`` where ``schedule`` is a list of
    :class:`JointAction`, one per slot.
    """
    if not cfg.frozen:
        raise ConfigError("the oracle needs a frozen scenario (no fading, no mobility)")
    check_oracle_limits(cfg)
    n = cfg.n_devices * cfg.n_slots
    if cfg.n_devices == 0:
        return 0.0, [JointAction.empty(cfg) for _ in range(cfg.n_slots)]
    orc = _Oracle(cfg, episode, max_states)
    state = orc.initial_state()
    _, sum_m, sum_b, _ = orc.best(state)
    schedule = []
    while state[0] < cfg.n_slots:
        _, _, _, (action, nxt) = orc.memo[state]
        schedule.append(orc.to_joint(state, action))
        state = nxt
    objective = cfg.k1 * (sum_m / n) + cfg.k2 * (sum_b / n)
    return objective, schedule


def replay_schedule(cfg: ScenarioConfig, schedule, episode: int = 0) -> Env:
    env = Env(cfg)
    env.reset(episode)
    for ja in schedule:
        env.step_joint(ja)
    return env
