"""Synthetic verifiable reasoning world.

A task is a start value and a reference answer. A trajectory is a short
sequence of arithmetic operations ending in ``STOP`` (or at the step budget).
The answer head is a fixed tempered softmax over the answer grid, centred on
the executed value, so the correctness likelihood of a trajectory does not
depend on the policy parameters.

The default world has at most 4**4 trajectories per task, which keeps every
expectation exactly computable by enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, GenerationError, InvalidActionError

STOP = "STOP"
KNOWN_OPS = ("+1", "+2", "-1", "*2", STOP)
SATURATION = 10**6

_APPLY = {
    "+1": lambda v: v + 1,
    "+2": lambda v: v + 2,
    "-1": lambda v: v - 1,
    "*2": lambda v: v * 2,
}


@dataclass(frozen=True)
class WorldConfig:
    start_value_range: tuple[int, int] = (0, 9)
    answer_grid: tuple[int, ...] = tuple(range(21))
    op_set: tuple[str, ...] = ("+1", "+2", "*2", STOP)
    max_steps: int = 4
    kappa: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "start_value_range", tuple(int(v) for v in self.start_value_range))
        object.__setattr__(self, "answer_grid", tuple(int(v) for v in self.answer_grid))
        object.__setattr__(self, "op_set", tuple(str(op) for op in self.op_set))
        lo, hi = self.start_value_range
        if lo > hi:
            raise ConfigError(f"empty start_value_range {self.start_value_range}")
        if not self.answer_grid:
            raise ConfigError("answer_grid must be nonempty")
        if list(self.answer_grid) != sorted(set(self.answer_grid)):
            raise ConfigError("answer_grid must be strictly increasing")
        unknown = [op for op in self.op_set if op not in KNOWN_OPS]
        if unknown:
            raise ConfigError(f"unknown operation codes {unknown}; allowed {KNOWN_OPS}")
        if len(set(self.op_set)) != len(self.op_set):
            raise ConfigError("op_set has duplicates")
        if STOP not in self.op_set:
            raise ConfigError("op_set must contain STOP")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not self.kappa > 0:
            raise ConfigError("kappa must be > 0")

    @cached_property
    def grid_array(self) -> np.ndarray:
        return np.asarray(self.answer_grid, dtype=np.float64)

    @cached_property
    def op_index(self) -> dict[str, int]:
        return {op: i for i, op in enumerate(self.op_set)}

    @property
    def n_ops(self) -> int:
        return len(self.op_set)

    def trajectory_count(self) -> int:
        """Number of distinct action sequences (the size of the latent space)."""
        n = self.n_ops - 1  # non-STOP actions
        return sum(n**k for k in range(self.max_steps)) + n**self.max_steps

    def to_dict(self) -> dict:
        return {
            "start_value_range": list(self.start_value_range),
            "answer_grid": list(self.answer_grid),
            "op_set": list(self.op_set),
            "max_steps": self.max_steps,
            "kappa": float(self.kappa),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        known = {"start_value_range", "answer_grid", "op_set", "max_steps", "kappa"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown world keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class Task:
    start_value: int
    reference_answer: int
    world: WorldConfig = field(default_factory=WorldConfig)
    task_id: int = 0


@dataclass(frozen=True)
class Trajectory:
    actions: tuple[str, ...]
    final_value: int
    length: int


def apply_op(op: str, value: int) -> int:
    out = _APPLY[op](value)
    return max(-SATURATION, min(SATURATION, out))


def execute(task: Task, actions: Sequence[str]) -> Trajectory:
    """Run ``actions`` from the task's start value.

    Length counts non-STOP actions, floored at 1.
    """
    world = task.world
    actions = tuple(actions)
    if len(actions) > world.max_steps:
        raise InvalidActionError(f"{len(actions)} actions exceed max_steps={world.max_steps}")
    value = task.start_value
    n_steps = 0
    for i, op in enumerate(actions):
        if op not in world.op_index:
            raise InvalidActionError(f"action {op!r} not in op_set {world.op_set}")
        if op == STOP:
            if i != len(actions) - 1:
                raise InvalidActionError("actions continue after STOP")
            break
        value = apply_op(op, value)
        n_steps += 1
    return Trajectory(actions=actions, final_value=value, length=max(1, n_steps))


def iter_action_sequences(world: WorldConfig) -> Iterator[tuple[str, ...]]:
    """All complete action sequences, lexicographic in op_set order."""

    def rec(prefix):
        if len(prefix) == world.max_steps:
            yield prefix
            return
        for op in world.op_set:
            if op == STOP:
                yield prefix + (STOP,)
            else:
                yield from rec(prefix + (op,))

    yield from rec(())


def iter_trajectories(task: Task) -> Iterator[Trajectory]:
    for actions in iter_action_sequences(task.world):
        yield execute(task, actions)


def reachable_answers(world: WorldConfig, start_value: int) -> list[int]:
    # STOP is always available, so every value visited within max_steps is a
    # possible final value; a frontier over values avoids walking trajectories
    moves = [op for op in world.op_set if op != STOP]
    frontier = seen = {start_value}
    for _ in range(world.max_steps):
        frontier = {apply_op(op, v) for v in frontier for op in moves}
        seen = seen | frontier
    return sorted(seen & set(world.answer_grid))


def generate_task(seed: int, config: WorldConfig | None = None) -> Task:
    """Draw a start value, then a reference answer uniformly among the grid
    values some trajectory actually reaches."""
    config = config or WorldConfig()
    rng = np.random.default_rng(seed)
    lo, hi = config.start_value_range
    start = int(rng.integers(lo, hi + 1))
    answers = reachable_answers(config, start)
    if not answers:
        raise GenerationError(
            f"no grid answer reachable from start {start} within {config.max_steps} steps"
        )
    target = answers[int(rng.integers(len(answers)))]
    return Task(start_value=start, reference_answer=target, world=config, task_id=int(seed))


def answer_log_probs(world: WorldConfig, final_value: int) -> np.ndarray:
    """Log-softmax of ``-kappa * |y - final_value|`` over the answer grid."""
    logits = -world.kappa * np.abs(world.grid_array - float(final_value))
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))


def answer_log_likelihood(task: Task, traj: Trajectory, target: int | None = None) -> float:
    """log L(z) = log P(target | z); target defaults to the reference answer."""
    world = task.world
    target = task.reference_answer if target is None else target
    try:
        idx = world.answer_grid.index(target)
    except ValueError:
        raise ValueError(f"target {target} not on the answer grid") from None
    return float(answer_log_probs(world, traj.final_value)[idx])


def predicted_answer(world: WorldConfig, final_value: int) -> int:
    """Argmax of the answer head (nearest grid value, lowest on ties)."""
    return world.answer_grid[int(np.argmin(np.abs(world.grid_array - final_value)))]
