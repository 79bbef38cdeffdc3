"""Communication overhead and trainable-parameter accounting for the two frameworks."""

from __future__ import annotations

from dataclasses import dataclass

from . import env as envmod
from .learn.nets import layer_shapes, param_count
from .scenario import ScenarioConfig

BITS_PER_ELEMENT = 16
L_PI_MODES = ("layers", "params")


def maddpg_bits(n_uav: int, uav_state: int, global_state: int) -> int:
    """Every UAV shares its state with the others and the joint state reaches each critic."""
    return BITS_PER_ELEMENT * (n_uav - 1) * uav_state + BITS_PER_ELEMENT * 1 * n_uav * global_state


def frl_bits(n_uav: int, l_pi: int) -> int:
    """Actor weights go up to the server once and come back to every UAV."""
    return BITS_PER_ELEMENT * l_pi + BITS_PER_ELEMENT * n_uav * l_pi


@dataclass(frozen=True)
class OverheadReport:
    framework: str
    n_uav: int
    uav_state: int
    global_state: int
    l_pi: int
    l_pi_mode: str
    bits: int

    @property
    def bytes(self) -> float:
        return self.bits / 8

    def to_dict(self):
        return {
            "framework": self.framework,
            "n_uav": self.n_uav,
            "uav_state": self.uav_state,
            "global_state": self.global_state,
            "l_pi": self.l_pi,
            "l_pi_mode": self.l_pi_mode,
            "bits": self.bits,
            "bytes": self.bytes,
        }


def actor_size(cfg: ScenarioConfig, actor_hidden, mode: str = "layers") -> int:
    """``L_pi``: hidden-layer count of a UAV actor, or its parameter count."""
    if mode == "layers":
        return len(tuple(actor_hidden))
    if mode == "params":
        return param_count(layer_shapes(envmod.uav_obs_dim(cfg), tuple(actor_hidden), envmod.uav_action_dim(cfg)))
    raise ValueError(f"unknown L_pi mode {mode!r}; choose from {L_PI_MODES}")


def overhead(cfg: ScenarioConfig, framework: str, actor_hidden=(64, 64), l_pi_mode: str = "layers") -> OverheadReport:
    M = cfg.n_uavs
    su = envmod.uav_obs_dim(cfg) if M else 0
    S = M * su + envmod.bs_obs_dim(cfg)
    l_pi = actor_size(cfg, actor_hidden, l_pi_mode)
    if framework == "maddpg":
        bits = maddpg_bits(M, su, S)
    elif framework == "frl":
        bits = frl_bits(M, l_pi)
    else:
        raise ValueError(f"unknown framework {framework!r}")
    return OverheadReport(framework, M, su, S, l_pi, l_pi_mode, int(bits))


def report_params(trainer) -> dict:
    """Per-network and total trainable-parameter counts of a built trainer.

    Counts are summed from each network's shape table and cross-checked
    against the length of its flat parameter vector; the number of networks
    is checked against the expected registry size.
    """
    nets = {}
    for name, net in trainer.registry().items():
        by_shape = param_count(net.params.shapes)
        if by_shape != net.params.count:
            raise AssertionError(f"{name}: shape table gives {by_shape}, vector holds {net.params.count}")
        nets[name] = by_shape
    live = {k: v for k, v in nets.items() if not k.startswith("target_")}
    return {
        "networks": nets,
        "n_networks": trainer.check_registry(),
        "trainable": sum(live.values()),
        "total": sum(nets.values()),
    }
