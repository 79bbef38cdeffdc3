"""Scenario configuration, seeded layout/task generation and the world state."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BITS_PER_KB = 8000


class ConfigError(ValueError):
    """Raised for an invalid or unrealisable scenario configuration."""


class LogicError(RuntimeError):
    """Raised when the simulator is driven against its state machine."""


class Stage(enum.IntEnum):
    AT_DEVICE = 0
    AT_UAV = 1  # uploaded, UAV share not yet executed
    UAV_DONE = 2  # UAV share executed, waiting for backhaul
    AT_BS = 3
    DONE = 4


@dataclass
class ScenarioConfig:
    """Full parameterisation of one experiment.

    Units: distances in m, powers and noise in W (linear), bandwidth in Hz,
    CPU capacities in cycles/ms, task sizes in bits, ``f_range`` in cycles/bit
    (or cycles per task when ``f_range_unit == "per_task"``).
    """

    n_devices: int = 15
    n_uavs: int = 5
    n_access_sub: int = 4
    n_backhaul_sub: int = 2
    uavs_per_backhaul_sub: int = 2
    n_slots: int = 100
    slot_ms: float = 1.0
    area_m: float = 200.0
    h_uav: float = 100.0
    h_bs: float = 25.0
    v_max: float = 5.0
    d_min: float = 10.0
    r_max: float = 300.0
    beta0: float = 1e-4
    bandwidth_hz: float = 40e6
    backhaul_bandwidth_hz: float | None = None
    noise_power: float = 1e-13
    rho_dev: float = 0.1
    p_max: float = 1.0
    f_uav_max: float = 1.2e7
    f_bs_max: float = 4.0e7
    d_range: tuple = (160000, 400000)
    f_range: tuple = (20.0, 50.0)
    f_range_unit: str = "per_bit"
    lambda_k: float | list = 0.5
    residual_ratio: float | list | None = None
    k1: float = 0.1
    k2: float = 0.1
    violation_penalty: float = 1.0
    backhaul_fading: bool = True
    coverage_metric: str = "horizontal"
    sinr_literal_power: bool = False
    no_uav: bool = False
    frozen: bool = False
    age_norm: float = 10.0
    seed: int = 0

    def __post_init__(self):
        self.d_range = tuple(self.d_range)
        self.f_range = tuple(self.f_range)
        self.validate()

    def validate(self):
        ints = {
            "n_devices": self.n_devices,
            "n_access_sub": self.n_access_sub,
            "n_backhaul_sub": self.n_backhaul_sub,
            "uavs_per_backhaul_sub": self.uavs_per_backhaul_sub,
            "n_slots": self.n_slots,
        }
        for name, v in ints.items():
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        if self.no_uav:
            if self.n_uavs != 0:
                raise ConfigError("no_uav scenarios must have n_uavs == 0")
        elif int(self.n_uavs) != self.n_uavs or self.n_uavs < 1:
            raise ConfigError(f"n_uavs must be an integer >= 1, got {self.n_uavs!r}")
        positive = (
            "slot_ms area_m h_uav h_bs v_max d_min r_max beta0 bandwidth_hz "
            "noise_power rho_dev p_max f_uav_max f_bs_max age_norm"
        ).split()
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.backhaul_bandwidth_hz is not None and not self.backhaul_bandwidth_hz > 0:
            raise ConfigError("backhaul_bandwidth_hz must be > 0")
        if self.d_min >= self.area_m:
            raise ConfigError("d_min must be smaller than area_m")
        lo, hi = self.d_range
        if not (0 < lo <= hi):
            raise ConfigError(f"bad d_range {self.d_range}")
        lo, hi = self.f_range
        if not (0 < lo <= hi):
            raise ConfigError(f"bad f_range {self.f_range}")
        if self.f_range_unit not in ("per_bit", "per_task"):
            raise ConfigError(f"bad f_range_unit {self.f_range_unit!r}")
        lam = np.asarray(self.lambda_k, dtype=np.float64)
        if lam.ndim > 1 or (lam.ndim == 1 and lam.size != self.n_devices):
            raise ConfigError("lambda_k must be a scalar or one value per device")
        if np.any(lam < 0) or np.any(lam > 1):
            raise ConfigError("lambda_k must lie in [0, 1]")
        if self.residual_ratio is not None:
            rr = np.asarray(self.residual_ratio, dtype=np.float64)
            if np.any(rr < 0) or np.any(rr > 1):
                raise ConfigError("residual_ratio must lie in [0, 1]")
        for name in ("k1", "k2"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.violation_penalty < 0:
            raise ConfigError("violation_penalty must be >= 0")
        if self.coverage_metric not in ("horizontal", "3d"):
            raise ConfigError(f"bad coverage_metric {self.coverage_metric!r}")

    # derived quantities

    @property
    def lam(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.lambda_k, dtype=np.float64), (self.n_devices,)).copy()

    @property
    def residual(self) -> np.ndarray:
        if self.residual_ratio is None:
            return 1.0 - self.lam
        return np.broadcast_to(
            np.asarray(self.residual_ratio, dtype=np.float64), (self.n_devices,)
        ).copy()

    @property
    def access_bw(self) -> float:
        """Access bandwidth in bits/ms per bit/s/Hz."""
        return self.bandwidth_hz * 1e-3

    @property
    def backhaul_bw(self) -> float:
        bw = self.bandwidth_hz if self.backhaul_bandwidth_hz is None else self.backhaul_bandwidth_hz
        return bw * 1e-3

    @property
    def n_receivers(self) -> int:
        return 1 if self.no_uav else self.n_uavs

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # serialisation

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["d_range"] = list(self.d_range)
        d["f_range"] = list(self.f_range)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Task:
    device: int
    D_bits: int
    F_cyc_per_bit: float
    D_residual_bits: int
    t_gen: int
    stage: Stage = Stage.AT_DEVICE
    uav: int = -1


@dataclass
class TaskRecord:
    """Event log entry of one task; slot fields are -1 until they happen."""

    device: int
    index: int
    t_gen: int
    upload: int = -1
    uav: int = -1
    uav_proc: int = -1
    forward: int = -1
    done: int = -1


def _task_table(cfg: ScenarioConfig, rng: np.random.Generator, n_tasks: int):
    """Pre-draw every task a device could need so draws never depend on the schedule."""
    K = cfg.n_devices
    lo, hi = cfg.d_range
    d = rng.integers(int(lo), int(hi) + 1, size=(K, n_tasks))
    flo, fhi = cfg.f_range
    f = rng.uniform(flo, fhi, size=(K, n_tasks))
    if cfg.f_range_unit == "per_task":
        f = f / d
    res = np.rint(cfg.residual[:, None] * d).astype(np.int64)
    return d.astype(np.int64), f, res


def place_uavs(cfg: ScenarioConfig, rng: np.random.Generator, max_attempts: int = 2000):
    """Uniform UAV placement with ``d_min`` spacing via rejection sampling."""
    M = cfg.n_uavs
    for _ in range(max_attempts):
        pts = np.empty((M, 2))
        ok = True
        for m in range(M):
            for _ in range(200):
                p = rng.uniform(0.0, cfg.area_m, size=2)
                if m == 0 or np.all(np.hypot(*(pts[:m] - p).T) >= cfg.d_min):
                    pts[m] = p
                    break
            else:
                ok = False
                break
        if ok:
            return pts
    raise ConfigError(
        f"could not place {M} UAVs {cfg.d_min} m apart in a {cfg.area_m} m square"
    )


@dataclass
class World:
    """Mutable state of one simulated episode."""

    cfg: ScenarioConfig
    episode: int
    t: int
    dev_xy: np.ndarray
    uav_xy: np.ndarray
    uav_vel: np.ndarray
    bs_xyz: np.ndarray
    task_d: np.ndarray
    task_f: np.ndarray
    task_res: np.ndarray
    fading: np.ndarray
    # per-device current task
    task_idx: np.ndarray
    stage: np.ndarray
    t_gen: np.ndarray
    uav_of: np.ndarray
    # ages at the start of slot t
    delta0: np.ndarray
    delta_m: np.ndarray
    delta_b: np.ndarray
    # last slot's backhaul interference (M, L)
    interference: np.ndarray
    records: list = field(default_factory=list)
    cur_rec: np.ndarray | None = None
    # channel snapshot for slot t
    access_gain: np.ndarray | None = None
    backhaul_hsq: np.ndarray | None = None
    coverage: np.ndarray | None = None

    @property
    def uav_xyz(self) -> np.ndarray:
        z = np.full((self.uav_xy.shape[0], 1), self.cfg.h_uav)
        return np.hstack([self.uav_xy, z])

    @property
    def dev_xyz(self) -> np.ndarray:
        return np.hstack([self.dev_xy, np.zeros((self.dev_xy.shape[0], 1))])

    def current_task(self, k: int) -> Task:
        n = self.task_idx[k]
        return Task(
            device=k,
            D_bits=int(self.task_d[k, n]),
            F_cyc_per_bit=float(self.task_f[k, n]),
            D_residual_bits=int(self.task_res[k, n]),
            t_gen=int(self.t_gen[k]),
            stage=Stage(int(self.stage[k])),
            uav=int(self.uav_of[k]),
        )

    def cur_d(self) -> np.ndarray:
        return self.task_d[np.arange(self.cfg.n_devices), self.task_idx]

    def cur_f(self) -> np.ndarray:
        return self.task_f[np.arange(self.cfg.n_devices), self.task_idx]

    def cur_res(self) -> np.ndarray:
        return self.task_res[np.arange(self.cfg.n_devices), self.task_idx]

    def copy(self) -> "World":
        out = dataclasses.replace(self)
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                setattr(out, f.name, v.copy())
        out.records = [dataclasses.replace(r) for r in self.records]
        return out

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                h.update(f.name.encode())
                h.update(np.ascontiguousarray(v).tobytes())
        h.update(repr(self.records).encode())
        return h.hexdigest()


def _streams(cfg: ScenarioConfig, episode: int):
    layout = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    tasks = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, episode]))
    fading = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, episode]))
    return layout, tasks, fading


def new_scenario(cfg: ScenarioConfig, episode: int = 0) -> World:
    """Build the initial world of ``episode`` for a seeded configuration.

    Device and initial UAV positions depend only on ``cfg.seed``; task draws
    and fading depend on ``(seed, episode)``.
    """
    cfg.validate()
    layout, task_rng, fade_rng = _streams(cfg, episode)
    K, M, L = cfg.n_devices, cfg.n_uavs, cfg.n_backhaul_sub
    dev_xy = layout.uniform(0.0, cfg.area_m, size=(K, 2))
    uav_xy = place_uavs(cfg, layout) if M > 0 else np.zeros((0, 2))
    n_tasks = cfg.n_slots + 2
    d, f, res = _task_table(cfg, task_rng, n_tasks)
    if cfg.backhaul_fading and not cfg.frozen:
        fading = fade_rng.exponential(1.0, size=(cfg.n_slots + 1, M, L))
    else:
        fading = np.ones((cfg.n_slots + 1, M, L))
    world = World(
        cfg=cfg,
        episode=episode,
        t=0,
        dev_xy=dev_xy,
        uav_xy=uav_xy,
        uav_vel=np.zeros((M, 2)),
        bs_xyz=np.array([cfg.area_m / 2, cfg.area_m / 2, cfg.h_bs]),
        task_d=d,
        task_f=f,
        task_res=res,
        fading=fading,
        task_idx=np.full(K, -1, dtype=np.int64),
        stage=np.full(K, int(Stage.DONE), dtype=np.int64),
        t_gen=np.zeros(K, dtype=np.int64),
        uav_of=np.full(K, -1, dtype=np.int64),
        delta0=np.zeros(K, dtype=np.int64),
        delta_m=np.zeros(K, dtype=np.int64),
        delta_b=np.zeros(K, dtype=np.int64),
        interference=np.zeros((M, L)),
        cur_rec=np.full(K, -1, dtype=np.int64),
    )
    for k in range(K):
        spawn_task(world, k, 0)
    refresh_channels(world)
    return world


def spawn_task(world: World, k: int, t: int) -> Task:
    """Generate device ``k``'s next task at slot ``t`` and reset its device age."""
    if world.task_idx[k] >= 0 and world.stage[k] != Stage.DONE:
        raise LogicError(f"device {k} still has a task in flight (stage {Stage(world.stage[k]).name})")
    n = world.task_idx[k] + 1
    if n >= world.task_d.shape[1]:
        raise LogicError("task table exhausted")
    world.task_idx[k] = n
    world.stage[k] = Stage.AT_DEVICE
    world.t_gen[k] = t
    world.uav_of[k] = -1
    world.delta0[k] = 0
    world.records.append(TaskRecord(device=k, index=int(n), t_gen=int(t)))
    world.cur_rec[k] = len(world.records) - 1
    return world.current_task(k)


def refresh_channels(world: World):
    """Recompute the channel snapshot for the world's current slot."""
    from . import _accel
    from .kinematics import coverage_matrix

    cfg = world.cfg
    if cfg.no_uav:
        world.access_gain = _accel.access_gain_matrix(world.bs_xyz[None, :], world.dev_xyz, cfg.beta0)
        world.coverage = np.ones((1, cfg.n_devices), dtype=bool)
        world.backhaul_hsq = np.zeros((0, cfg.n_backhaul_sub))
        return
    uav = world.uav_xyz
    world.access_gain = _accel.access_gain_matrix(uav, world.dev_xyz, cfg.beta0)
    world.coverage = coverage_matrix(uav, world.dev_xyz, cfg.r_max, cfg.coverage_metric)
    los = _accel.access_gain_matrix(uav, world.bs_xyz[None, :], cfg.beta0)[:, 0]
    slot = min(world.t, world.fading.shape[0] - 1)
    world.backhaul_hsq = los[:, None] * world.fading[slot]
