from .nets import Adam, MlpNet, ParamSet, Sgd, TrainingError, grad_step, soft_update
from .replay import ReplayBuffer
from .trainer import Trainer, TrainerConfig, critic_targets, expected_network_count, train

__all__ = [
    "Adam",
    "MlpNet",
    "ParamSet",
    "ReplayBuffer",
    "Sgd",
    "Trainer",
    "TrainerConfig",
    "TrainingError",
    "critic_targets",
    "expected_network_count",
    "grad_step",
    "soft_update",
    "train",
]
