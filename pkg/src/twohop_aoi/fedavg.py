"""Central averaging of UAV actor parameters with a symmetric mixing matrix."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MixMatrix:
    """Doubly stochastic mixing matrix: ``w`` on the diagonal, ``(1-w)/(M-1)`` elsewhere."""

    n_agents: int
    w: float

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"self weight {self.w} outside [0, 1]")

    @property
    def off(self) -> float:
        return 0.0 if self.n_agents == 1 else (1.0 - self.w) / (self.n_agents - 1)

    def matrix(self) -> np.ndarray:
        M = self.n_agents
        if M == 1:
            return np.ones((1, 1))
        omega = np.full((M, M), self.off)
        np.fill_diagonal(omega, self.w)
        return omega


def aggregate(params, mix: MixMatrix):
    """Return new ParamSets ``w*theta_i + off * sum_{j != i} theta_j``.

    Computed as ``off*total + (w - off)*theta_i``; the few-ulp defect of the
    agent sum is then returned to the largest entry of each coordinate.
    """
    from .learn.nets import ParamSet  # deferred: the learn package imports this module

    params = list(params)
    if len(params) != mix.n_agents:
        raise ValueError(f"{len(params)} parameter sets for a {mix.n_agents}-agent mix")
    if not params:
        return []
    shapes = params[0].shapes
    for p in params[1:]:
        if p.shapes != shapes:
            raise ValueError("parameter shapes differ across agents")
    if mix.n_agents == 1:
        return [params[0].copy()]
    stack = np.stack([p.values for p in params])
    total = stack.sum(axis=0)
    out = mix.off * total[None, :] + (mix.w - mix.off) * stack
    # fold each coordinate's rounding defect into its largest entry so the
    # agent sum (hence the mean) is kept to within one final rounding
    defect = np.array([math.fsum(c) for c in np.concatenate([stack, -out]).T])
    rows = np.argmax(np.abs(out), axis=0)
    out[rows, np.arange(out.shape[1])] += defect
    return [ParamSet(list(shapes), row.copy()) for row in out]


def schedule(epoch: int, period: int) -> bool:
    """Aggregation gate: every ``period`` epochs, never before epoch 2."""
    if period < 1:
        raise ValueError("aggregation period must be >= 1")
    return epoch >= 2 and epoch % period == 0


def max_spread(params) -> float:
    """Largest pairwise parameter gap (max norm) across agents."""
    stack = np.stack([p.values for p in params])
    if stack.shape[0] < 2:
        return 0.0
    return float(np.max(stack.max(axis=0) - stack.min(axis=0)))


EVENT_HEADER = ["epoch", "w", "period", "spread_before", "spread_after"]


@dataclass
class EventLog:
    rows: list = field(default_factory=list)

    def add(self, epoch, w, period, before, after):
        self.rows.append([int(epoch), repr(float(w)), int(period), repr(float(before)), repr(float(after))])

    def write(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(EVENT_HEADER)
            wr.writerows(self.rows)
