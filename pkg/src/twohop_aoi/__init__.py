"""Two-hop UAV-assisted edge computing simulator with AoI-driven multi-agent learning."""

__version__ = "0.1.0"

from .scenario import ConfigError, LogicError, ScenarioConfig, Stage, World, new_scenario
from .env import ActionError, Env, JointAction

__all__ = [
    "ActionError",
    "ConfigError",
    "Env",
    "JointAction",
    "LogicError",
    "ScenarioConfig",
    "Stage",
    "World",
    "new_scenario",
    "__version__",
]
