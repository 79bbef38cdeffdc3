"""Command line entry point: ``twohop-aoi {run,sweep,oracle-check,overhead}``.

Failures print a one-line JSON object ``{"error": ..., "message": ...}`` on
stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .accounting import L_PI_MODES, overhead
from .baselines import PolicySpec, oracle_schedule, replay_schedule, run_policy
from .bench import ALGOS, PlanError, load_plan, run
from .learn.trainer import TrainerConfig
from .scenario import ScenarioConfig


def _axis(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"axis must look like name=v1,v2 (got {text!r})")
    name, raw = text.split("=", 1)
    values = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    return name.strip(), values


def _common(p, need_config=True):
    p.add_argument("--config", required=need_config, help="scenario or plan JSON")
    p.add_argument("--seeds", type=int, default=1, help="run seeds 0..N-1")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--backhaul", choices=("noma", "ofdma"), default=None)
    p.add_argument("--no-uav", action="store_true", default=None)
    p.add_argument("--episodes", type=int, default=None, help="episodes per run (training or evaluation)")
    p.add_argument("--trainer", default=None, help="trainer JSON overriding the plan's trainer block")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells")


def build_parser():
    ap = argparse.ArgumentParser(prog="twohop-aoi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="one configuration, one algorithm, several seeds")
    _common(p)
    p.add_argument("--algo", choices=ALGOS, default="greedy")

    p = sub.add_parser("sweep", help="grid over scenario fields and algorithms")
    _common(p)
    p.add_argument("--algo", choices=ALGOS, nargs="+", default=None)
    p.add_argument("--axis", type=_axis, action="append", default=None, help="name=v1,v2,... (repeatable)")

    p = sub.add_parser("oracle-check", help="exhaustive schedule vs replay and baselines on tiny frozen instances")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", default=None, help="optional CSV path for per-instance results")

    p = sub.add_parser("overhead", help="communication overhead of both frameworks")
    p.add_argument("--config", default=None)
    p.add_argument("--trainer", default=None)
    p.add_argument("--l-pi", choices=L_PI_MODES, default="layers")
    return ap


def _plan(args, algos, axes):
    plan = load_plan(args.config, args.out)
    if args.seeds < 1:
        raise PlanError("--seeds must be >= 1")
    plan.seeds = list(range(args.seeds))
    if algos is not None:
        plan.algos = algos
    if axes is not None:
        plan.axes = axes
    if args.backhaul is not None:
        plan.backhaul = args.backhaul
    if args.no_uav:
        plan.no_uav = True
    if args.trainer:
        plan.trainer = TrainerConfig.from_dict(json.loads(Path(args.trainer).read_text()))
    if args.episodes is not None:
        plan.episodes = args.episodes
        plan.trainer.episodes = args.episodes
    return plan


def cmd_run(args):
    plan = _plan(args, [args.algo], {})
    out = run(plan, jobs=args.jobs)
    print(json.dumps({"out": str(out), "cells": 1, "seeds": plan.seeds}))


def cmd_sweep(args):
    axes = dict(args.axis) if args.axis else None
    plan = _plan(args, args.algo, axes)
    if not plan.axes:
        raise PlanError("a sweep needs at least one axis")
    out = run(plan, jobs=args.jobs)
    n = 1
    for v in plan.axes.values():
        n *= len(v)
    print(json.dumps({"out": str(out), "cells": n * len(plan.algos), "seeds": plan.seeds}))


def oracle_check(cfg: ScenarioConfig, seeds):
    """Oracle objective, its replay, greedy and random for each seed."""
    rows = []
    for s in seeds:
        c = cfg.replace(seed=s, frozen=True)
        obj, sched = oracle_schedule(c)
        replay = replay_schedule(c, sched).log.summary(c)[2]
        greedy = run_policy(c, PolicySpec("greedy_max_age")).log.summary(c)[2]
        rand = run_policy(c, PolicySpec("random", s)).log.summary(c)[2]
        rows.append({"seed": s, "oracle": obj, "replay": replay, "greedy": greedy, "random": rand,
                     "ok": replay == obj and obj <= greedy <= rand})
    return rows


def cmd_oracle_check(args):
    cfg = ScenarioConfig.load(args.config)
    rows = oracle_check(cfg, range(args.seeds))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            wr.writeheader()
            for r in rows:
                wr.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    ok = all(r["ok"] for r in rows)
    print(json.dumps({"instances": len(rows), "ok": ok, "results": rows}))
    return 0 if ok else 1


def cmd_overhead(args):
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    tcfg = TrainerConfig.from_dict(json.loads(Path(args.trainer).read_text())) if args.trainer else TrainerConfig()
    reports = [overhead(cfg, fw, tcfg.actor_hidden, args.l_pi).to_dict() for fw in ("maddpg", "frl")]
    print(json.dumps(reports))


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle-check": cmd_oracle_check, "overhead": cmd_overhead}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args) or 0
    except Exception as exc:  # reported as JSON for machine consumers
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
