"""Cross-view utility and group-relative advantages.

For each posterior path the answer log-likelihood is measured without answer
guidance (the answer head only sees the executed value) and compared with the
mean over the prior paths of the same group. Paths that do no better than the
prior are truncated to zero utility; the rest are scaled by a clamped
relative-length factor and Z-scored within the group.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .env import Task, Trajectory, answer_log_likelihood
from .errors import ConfigError


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 0.5
    beta: float = 1.0
    eta_min: float = 0.5
    eta_max: float = 2.0
    group_size: int = 4
    z_eps: float = 1e-8
    learning_rate: float = 0.05
    # "task": baseline from the same task's prior paths; "batch": all prior
    # paths of the iteration
    baseline_scope: str = "task"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if not 0 < self.eta_min <= self.eta_max:
            raise ConfigError(f"need 0 < eta_min <= eta_max, got [{self.eta_min}, {self.eta_max}]")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2")
        if not self.z_eps > 0 or not self.learning_rate > 0:
            raise ConfigError("z_eps and learning_rate must be > 0")
        if self.baseline_scope not in ("task", "batch"):
            raise ConfigError(f"baseline_scope must be 'task' or 'batch', got {self.baseline_scope!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown hyperparameter keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class UtilityRecord:
    u_post: float
    r_correct: float
    eta: float
    s_hat: float
    advantage: float


@dataclass
class GroupBatch:
    task: Task
    prior_paths: list[Trajectory]
    posterior_paths: list[Trajectory]
    l_base: float
    u_prior_mean: float
    records: list[UtilityRecord] = field(default_factory=list)

    @property
    def advantages(self) -> np.ndarray:
        return np.array([r.advantage for r in self.records])


def prior_baseline(prior_paths: Sequence[Trajectory], task: Task) -> float:
    """Mean answer log-likelihood of the prior paths."""
    if len(prior_paths) == 0:
        raise ValueError("prior baseline needs at least one path")
    return math.fsum(answer_log_likelihood(task, z) for z in prior_paths) / len(prior_paths)


def relative_correctness(u_post: float, u_prior_mean: float) -> float:
    return max(0.0, u_post - u_prior_mean)


def efficiency_coeff(l_base: float, l_z: float, hp: HyperParams) -> float:
    return min(max((l_base / l_z) ** hp.alpha, hp.eta_min), hp.eta_max)


def utility(r_correct: float, eta: float) -> float:
    return r_correct * eta


def group_advantages(s_hats: Sequence[float], z_eps: float = 1e-8) -> np.ndarray:
    """Z-score with population std; ``z_eps`` keeps constant groups at zero."""
    s = np.asarray(s_hats, dtype=np.float64)
    if s.size < 2:
        raise ValueError(f"group of size {s.size}; need at least 2")
    return (s - s.mean()) / (s.std() + z_eps)


def score_group(
    task: Task,
    prior_paths: Sequence[Trajectory],
    posterior_paths: Sequence[Trajectory],
    hp: HyperParams,
    u_prior_mean: float | None = None,
) -> GroupBatch:
    """Build the utility records and advantages for one task's group.

    ``u_prior_mean`` overrides the same-task baseline (batch-scope option).
    """
    l_base = float(np.mean([z.length for z in prior_paths]))
    if u_prior_mean is None:
        u_prior_mean = prior_baseline(prior_paths, task)
    partial = []
    for z in posterior_paths:
        u = answer_log_likelihood(task, z)
        r = relative_correctness(u, u_prior_mean)
        eta = efficiency_coeff(l_base, z.length, hp)
        partial.append((u, r, eta, utility(r, eta)))
    adv = group_advantages([p[3] for p in partial], hp.z_eps)
    records = [UtilityRecord(u, r, eta, s, float(a)) for (u, r, eta, s), a in zip(partial, adv)]
    return GroupBatch(task, list(prior_paths), list(posterior_paths), l_base, u_prior_mean, records)
