"""Budgeted active-localization scheduling (DQN) combined with sampling-based MPC."""
from .dynamics import ControlInput, DynamicsParams, PhysicalState
from .env import EnvConfig, TrackingEnv
from .mpc import MpcConfig, ReferenceTrajectory
from .scheduler import TrainConfig
from .tasks import TaskGenConfig, TaskSpec

__all__ = [
    "ControlInput", "DynamicsParams", "PhysicalState", "EnvConfig", "TrackingEnv",
    "MpcConfig", "ReferenceTrajectory", "TrainConfig", "TaskGenConfig", "TaskSpec",
]
__version__ = "0.1.0"
