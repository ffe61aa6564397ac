"""Posterior-guided policy optimization with efficiency-aware utility on an
exactly enumerable arithmetic reasoning world."""

__version__ = "0.1.0"

from .env import Task, Trajectory, WorldConfig, execute, generate_task
from .errors import CapacityError, ConfigError, GenerationError, InvalidActionError, NumericError, SupportError
from .policy import PRIOR, Conditioning, PolicyParams, grad_log_prob, log_prob, sample_trajectory
from .scoring import HyperParams, score_group
from .distill import distill_gradient, optimizer_step, pg_gradient, total_gradient
from .oracle import EnumerationReport, enumerate_world
from .trainer import TrainConfig, run_training
from .metrics import epsilon_cubed, keyword_scan

__all__ = [
    "Task", "Trajectory", "WorldConfig", "execute", "generate_task",
    "CapacityError", "ConfigError", "GenerationError", "InvalidActionError", "NumericError", "SupportError",
    "PRIOR", "Conditioning", "PolicyParams", "grad_log_prob", "log_prob", "sample_trajectory",
    "HyperParams", "score_group",
    "distill_gradient", "optimizer_step", "pg_gradient", "total_gradient",
    "EnumerationReport", "enumerate_world",
    "TrainConfig", "run_training",
    "epsilon_cubed", "keyword_scan",
]
