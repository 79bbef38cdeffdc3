"""Experiment plans, the grid runner and its CSV/JSON outputs.

Output layout of a plan run::

    OUT/manifest.json          config hash, seeds, version, the plan itself
    OUT/summary.csv            one row per cell: mean and std over seeds
    OUT/tidy.csv               one row per (axis values, algorithm, seed)
    OUT/overhead.csv           communication overhead per framework
    OUT/<cell>/seed<S>.csv     per-slot MetricsRecord stream
    OUT/<cell>/trace_seed<S>.csv     AoI trace of the final episode
    OUT/<cell>/curve_seed<S>.csv     learning curve (learners only)
    OUT/<cell>/fedavg_seed<S>.csv    aggregation events (frl only)

Per-run values are the mean of the per-episode means over the last
``summary_tail`` episodes. Every reduction uses ``math.fsum`` so summaries
can be recomputed exactly from the per-slot files.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .accounting import overhead, report_params  # noqa: F401  (re-exported)
from .baselines import PolicySpec, no_uav_scenario, ofdma_backhaul_variant, run_policy
from .env import Env, MetricsRecord
from .learn.trainer import TrainerConfig, train
from .scenario import ConfigError, ScenarioConfig

ALGOS = ("maddpg", "frl", "random", "greedy", "round_robin")
POLICY_KIND = {"random": "random", "greedy": "greedy_max_age", "round_robin": "round_robin"}
LEARNERS = ("maddpg", "frl")


class PlanError(ValueError):
    """Invalid experiment plan."""


@dataclass
class ExperimentPlan:
    scenario: ScenarioConfig
    algos: list
    seeds: list
    out: str
    axes: dict = field(default_factory=dict)
    backhaul: str = "noma"
    no_uav: bool = False
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    episodes: int = 1
    summary_tail: int = 20
    traces: bool = True

    def validate(self):
        if not self.algos:
            raise PlanError("no algorithm selected")
        bad = [a for a in self.algos if a not in ALGOS]
        if bad:
            raise PlanError(f"unknown algorithms {bad}; choose from {ALGOS}")
        if not self.seeds:
            raise PlanError("no seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise PlanError("seeds must be distinct")
        for name, values in self.axes.items():
            if name not in ScenarioConfig.__dataclass_fields__:
                raise PlanError(f"unknown sweep axis {name!r}")
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise PlanError(f"sweep axis {name!r} is empty")
        if self.backhaul not in ("noma", "ofdma"):
            raise PlanError(f"backhaul must be noma or ofdma, got {self.backhaul!r}")
        if self.episodes < 1 or self.summary_tail < 1:
            raise PlanError("episodes and summary_tail must be >= 1")
        self.trainer.validate()
        for cfg in self.cell_configs():
            cfg.validate()
        return self

    def base_config(self) -> ScenarioConfig:
        cfg = self.scenario
        if self.backhaul == "ofdma":
            cfg = ofdma_backhaul_variant(cfg)
        if self.no_uav:
            cfg = no_uav_scenario(cfg)
        return cfg

    def cells(self):
        """``(axis values dict, algorithm)`` for every grid cell, axes first."""
        names = list(self.axes)
        for values in itertools.product(*(self.axes[n] for n in names)):
            point = dict(zip(names, values))
            for algo in self.algos:
                yield point, algo

    def cell_configs(self):
        names = list(self.axes)
        for values in itertools.product(*(self.axes[n] for n in names)):
            yield self.base_config().replace(**dict(zip(names, values)))

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "algos": list(self.algos),
            "seeds": list(self.seeds),
            "axes": {k: list(v) for k, v in self.axes.items()},
            "backhaul": self.backhaul,
            "no_uav": self.no_uav,
            "trainer": self.trainer.to_dict(),
            "episodes": self.episodes,
            "summary_tail": self.summary_tail,
            "traces": self.traces,
        }

    @classmethod
    def from_dict(cls, d, out):
        d = dict(d)
        known = {"scenario", "algos", "seeds", "axes", "backhaul", "no_uav", "trainer", "episodes",
                 "summary_tail", "traces"}
        unknown = set(d) - known
        if unknown:
            raise PlanError(f"unknown plan keys: {sorted(unknown)}")
        return cls(
            scenario=ScenarioConfig.from_dict(d["scenario"]),
            algos=list(d.get("algos", ["greedy"])),
            seeds=[int(s) for s in d.get("seeds", [0])],
            out=str(out),
            axes={k: list(v) for k, v in d.get("axes", {}).items()},
            backhaul=d.get("backhaul", "noma"),
            no_uav=bool(d.get("no_uav", False)),
            trainer=TrainerConfig.from_dict(d.get("trainer", {})),
            episodes=int(d.get("episodes", 1)),
            summary_tail=int(d.get("summary_tail", 20)),
            traces=bool(d.get("traces", True)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def cell_name(index: int, point: dict, algo: str) -> str:
    parts = [f"{k}={v}" for k, v in point.items()]
    return "_".join([f"cell{index:03d}", *parts, algo])


# --- statistics ----------------------------------------------------------------


def mean(xs):
    xs = list(xs)
    return math.fsum(xs) / len(xs)


def std(xs):
    """Population standard deviation."""
    xs = list(xs)
    mu = mean(xs)
    return math.sqrt(math.fsum((x - mu) ** 2 for x in xs) / len(xs))


def run_value(rows, tail):
    """Per-run (mean_m, mean_b, objective, violations) from per-slot rows.

    ``rows`` are ``(episode, mean_m, mean_b, objective, violations)`` tuples.
    """
    episodes = {}
    for ep, m, b, o, v in rows:
        episodes.setdefault(ep, []).append((m, b, o, v))
    keep = sorted(episodes)[-tail:]
    per = [
        (mean(r[0] for r in episodes[e]), mean(r[1] for r in episodes[e]), mean(r[2] for r in episodes[e]),
         sum(r[3] for r in episodes[e]))
        for e in keep
    ]
    return mean(p[0] for p in per), mean(p[1] for p in per), mean(p[2] for p in per), mean(p[3] for p in per)


def read_slot_csv(path):
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        return [
            (int(r["episode"]), float(r["mean_delta_m"]), float(r["mean_delta_b"]), float(r["objective"]),
             int(r["violations"]))
            for r in rd
        ]


# --- execution -------------------------------------------------------------------


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def run_one(cfg: ScenarioConfig, algo: str, seed: int, plan: ExperimentPlan, run_dir: Path):
    """Execute one (cell, seed) and write its files; returns the per-run summary tuple."""
    cfg = cfg.replace(seed=seed)
    records = []
    trace = None
    if algo in LEARNERS:
        tcfg = TrainerConfig.from_dict({**plan.trainer.to_dict(), "seed": seed})
        res = train(cfg, tcfg, algo)
        records = res.records
        trace = res.trace
        res.write_curve(run_dir / f"curve_seed{seed}.csv")
        if algo == "frl":
            res.events.write(run_dir / f"fedavg_seed{seed}.csv")
    else:
        spec = PolicySpec(POLICY_KIND[algo], seed)
        env = Env(cfg)
        for ep in range(plan.episodes):
            run_policy(cfg, spec, ep, env)
            records.extend(env.log.records)
        trace = env.log.trace_rows()
    _write_rows(run_dir / f"seed{seed}.csv", MetricsRecord.header(cfg), [r.row() for r in records])
    if plan.traces and trace is not None:
        _write_rows(run_dir / f"trace_seed{seed}.csv", ["slot", "device", "delta0", "delta_m", "delta_b", "stage"], trace)
    rows = [(r.episode, r.mean_m, r.mean_b, r.objective, r.violations) for r in records]
    return run_value(rows, plan.summary_tail) if rows else (0.0, 0.0, 0.0, 0.0)


def _job(args):
    cfg_dict, algo, seed, plan_dict, out, run_dir = args
    plan = ExperimentPlan.from_dict(plan_dict, out)
    return run_one(ScenarioConfig.from_dict(cfg_dict), algo, seed, plan, Path(run_dir))


def run(plan: ExperimentPlan, jobs: int = 1) -> Path:
    """Run every cell and seed of ``plan`` and write all outputs under ``plan.out``."""
    plan.validate()
    out = Path(plan.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PlanError(f"output directory {out} is not writable: {exc}") from exc

    names = list(plan.axes)
    cfgs = list(plan.cell_configs())
    tasks = []
    cells = []
    for index, (point, algo) in enumerate(plan.cells()):
        cfg = cfgs[index // len(plan.algos)]
        run_dir = out / cell_name(index, point, algo)
        run_dir.mkdir(exist_ok=True)
        cells.append((point, algo, cfg))
        for seed in plan.seeds:
            tasks.append((cfg.to_dict(), algo, seed, plan.to_dict(), str(out), str(run_dir)))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]

    tidy, summary = [], []
    n_seeds = len(plan.seeds)
    for c, (point, algo, cfg) in enumerate(cells):
        vals = results[c * n_seeds : (c + 1) * n_seeds]
        for seed, v in zip(plan.seeds, vals):
            tidy.append([*(point[n] for n in names), algo, seed, *(repr(float(x)) for x in v)])
        cols = list(zip(*vals))
        summary.append(
            [*(point[n] for n in names), algo, n_seeds]
            + [repr(f(col)) for col in cols[:3] for f in (mean, std)]
            + [repr(mean(cols[3]))]
        )
    metric_cols = ["mean_delta_m", "mean_delta_b", "objective", "violations"]
    _write_rows(out / "tidy.csv", [*names, "algo", "seed", *metric_cols], tidy)
    _write_rows(
        out / "summary.csv",
        [*names, "algo", "n_seeds", "mean_delta_m", "std_delta_m", "mean_delta_b", "std_delta_b",
         "objective", "std_objective", "violations"],
        summary,
    )

    ovh = []
    for point, cfg in zip(itertools.product(*(plan.axes[n] for n in names)), cfgs):
        for fw in LEARNERS:
            for mode in ("layers", "params"):
                rep = overhead(cfg, fw, plan.trainer.actor_hidden, mode)
                ovh.append([*point, fw, mode, rep.l_pi, rep.uav_state, rep.global_state, rep.bits, repr(rep.bytes)])
    _write_rows(out / "overhead.csv", [*names, "framework", "l_pi_mode", "l_pi", "uav_state", "global_state", "bits",
                                       "bytes"], ovh)

    manifest = {
        "version": __version__,
        "plan_hash": plan.digest(),
        "config_hashes": [cfg.digest() for cfg in cfgs],
        "seeds": list(plan.seeds),
        "plan": plan.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_plan(path, out, **overrides) -> ExperimentPlan:
    """Read a plan JSON, or a bare scenario JSON wrapped into a single-cell plan."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if "scenario" not in data:
        data = {"scenario": data}
    plan = ExperimentPlan.from_dict(data, out)
    for k, v in overrides.items():
        if v is not None:
            setattr(plan, k, v)
    return plan
