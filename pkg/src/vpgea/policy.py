"""Parameter-shared dual-stream log-linear policy.

One weight vector serves two streams. The prior stream scores an action from
the current-value bucket only. The posterior stream adds goal features built
from the signed distance between the conditioning target and the current
value. Zeroing the goal block makes the two streams identical.

Feature layout (dense vector)::

    [ value bucket x action | goal bucket x action ]

Value buckets are the integers spanned by the start range and the answer grid,
plus one underflow and one overflow bucket. Goal buckets are distance 0, and
distances {1, 2, 3-4, >=5} on each side of the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import STOP, Task, Trajectory, WorldConfig, apply_op, execute
from .errors import NumericError

LAYOUT_VERSION = "vpgea-features/1"
N_GOAL_BUCKETS = 9
STREAM_TAGS = {"prior": 0, "posterior": 1, "eval": 2, "oracle": 3}


@dataclass(frozen=True)
class Conditioning:
    """Which stream to run: ``target=None`` is the prior, otherwise the
    posterior conditioned on ``target``."""

    target: int | None = None

    @classmethod
    def posterior(cls, target: int) -> "Conditioning":
        return cls(int(target))

    @property
    def is_posterior(self) -> bool:
        return self.target is not None


PRIOR = Conditioning()


def distance_bucket(distance: int) -> int:
    d = abs(distance)
    if d <= 2:
        return d
    return 3 if d <= 4 else 4


def goal_bucket(target: int, value: int) -> int:
    diff = target - value
    if diff == 0:
        return 0
    side = 0 if diff > 0 else 4
    return side + distance_bucket(diff)


@dataclass(frozen=True)
class FeatureLayout:
    op_set: tuple[str, ...]
    value_lo: int
    value_hi: int

    @classmethod
    def for_world(cls, world: WorldConfig) -> "FeatureLayout":
        lo = min(world.start_value_range[0], world.answer_grid[0])
        hi = max(world.start_value_range[1], world.answer_grid[-1])
        return cls(world.op_set, lo, hi)

    @property
    def n_ops(self) -> int:
        return len(self.op_set)

    @property
    def n_value_buckets(self) -> int:
        return self.value_hi - self.value_lo + 3

    @property
    def n_base(self) -> int:
        return self.n_value_buckets * self.n_ops

    @property
    def dim(self) -> int:
        return self.n_base + N_GOAL_BUCKETS * self.n_ops

    def value_bucket(self, value: int) -> int:
        return min(max(value - self.value_lo + 1, 0), self.n_value_buckets - 1)

    def base_offset(self, value: int) -> int:
        return self.value_bucket(value) * self.n_ops

    def goal_offset(self, target: int, value: int) -> int:
        return self.n_base + goal_bucket(target, value) * self.n_ops

    def goal_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        mask[self.n_base:] = True
        return mask


@dataclass(frozen=True, eq=False)
class PolicyParams:
    weights: np.ndarray
    layout: FeatureLayout

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.layout.dim,):
            raise ValueError(f"weights shape {w.shape} != ({self.layout.dim},)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, world: WorldConfig) -> "PolicyParams":
        layout = FeatureLayout.for_world(world)
        return cls(np.zeros(layout.dim), layout)

    @classmethod
    def random(cls, world: WorldConfig, rng: np.random.Generator, scale: float = 1.0) -> "PolicyParams":
        layout = FeatureLayout.for_world(world)
        return cls(rng.normal(0.0, scale, layout.dim), layout)

    def replace(self, weights: np.ndarray) -> "PolicyParams":
        return PolicyParams(weights, self.layout)

    @property
    def base_weights(self) -> np.ndarray:
        return self.weights[: self.layout.n_base]

    @property
    def goal_weights(self) -> np.ndarray:
        return self.weights[self.layout.n_base:]

    def to_json(self) -> str:
        lay = self.layout
        return json.dumps(
            {
                "layout": LAYOUT_VERSION,
                "op_set": list(lay.op_set),
                "value_range": [lay.value_lo, lay.value_hi],
                "n_goal_buckets": N_GOAL_BUCKETS,
                "weights": [float(x) for x in self.weights],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PolicyParams":
        d = json.loads(text)
        if d.get("layout") != LAYOUT_VERSION:
            raise ValueError(f"unsupported feature layout {d.get('layout')!r}")
        layout = FeatureLayout(tuple(d["op_set"]), *d["value_range"])
        return cls(np.asarray(d["weights"], dtype=np.float64), layout)


def features(task: Task, current_value: int, action: str, cond: Conditioning) -> frozenset[int]:
    """Active feature indices for one (state, action) pair."""
    lay = FeatureLayout.for_world(task.world)
    a = lay.op_set.index(action)
    idx = {lay.base_offset(current_value) + a}
    if cond.is_posterior:
        idx.add(lay.goal_offset(cond.target, current_value) + a)
    return frozenset(idx)


def action_scores(params: PolicyParams, current_value: int, cond: Conditioning) -> np.ndarray:
    lay = params.layout
    b = lay.base_offset(current_value)
    scores = params.weights[b : b + lay.n_ops]
    if cond.is_posterior:
        g = lay.goal_offset(cond.target, current_value)
        scores = scores + params.weights[g : g + lay.n_ops]
    return scores


def softmax(scores: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NumericError(f"non-finite action scores {scores}")
    z = np.exp(scores - scores.max())
    return z / z.sum()


def step_distribution(params: PolicyParams, task: Task, current_value: int, cond: Conditioning) -> np.ndarray:
    """Probabilities over ``op_set`` at one decoding step."""
    return softmax(action_scores(params, current_value, cond))


def log_softmax(scores: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NumericError(f"non-finite action scores {scores}")
    m = scores.max()
    return scores - (m + np.log(np.exp(scores - m).sum()))


def rollout_rng(seed: int, iteration: int, task_id: int, stream: str, index: int) -> np.random.Generator:
    """Independent stream per rollout, keyed on its coordinates rather than
    on the order rollouts happen to be drawn in."""
    key = [int(seed), int(iteration), int(task_id), STREAM_TAGS[stream], int(index)]
    return np.random.default_rng(np.random.SeedSequence(key))


class _Sampler:
    # step distributions depend only on the current value, so one sampler
    # caches them across the rollouts it draws
    def __init__(self, params: PolicyParams, task: Task, cond: Conditioning):
        self.params, self.task, self.cond = params, task, cond
        self.cache: dict[int, np.ndarray] = {}

    def cdf(self, value: int) -> np.ndarray:
        c = self.cache.get(value)
        if c is None:
            c = np.cumsum(step_distribution(self.params, self.task, value, self.cond))
            self.cache[value] = c
        return c

    def draw(self, rng: np.random.Generator) -> Trajectory:
        ops = self.params.layout.op_set
        value = self.task.start_value
        actions = []
        for _ in range(self.task.world.max_steps):
            c = self.cdf(value)
            a = min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), len(ops) - 1)
            op = ops[a]
            actions.append(op)
            if op == STOP:
                break
            value = apply_op(op, value)
        return execute(self.task, actions)


def sample_trajectory(params: PolicyParams, task: Task, cond: Conditioning, rng: np.random.Generator) -> Trajectory:
    return _Sampler(params, task, cond).draw(rng)


def sample_trajectories(
    params: PolicyParams, task: Task, cond: Conditioning, rngs: Sequence[np.random.Generator]
) -> list[Trajectory]:
    """One trajectory per generator, sharing the per-state cache."""
    sampler = _Sampler(params, task, cond)
    return [sampler.draw(r) for r in rngs]


def _visited(task: Task, traj: Trajectory):
    value = task.start_value
    for op in traj.actions:
        yield value, op
        if op == STOP:
            return
        value = apply_op(op, value)


def log_prob(params: PolicyParams, task: Task, traj: Trajectory, cond: Conditioning) -> float:
    """Sum of log step probabilities, including the STOP step when present."""
    ops = params.layout.op_set
    total = 0.0
    for value, op in _visited(task, traj):
        total += float(log_softmax(action_scores(params, value, cond))[ops.index(op)])
    return total


def grad_log_prob(params: PolicyParams, task: Task, traj: Trajectory, cond: Conditioning) -> np.ndarray:
    """Score function: sum over steps of phi(a_t) - E_p[phi(a)]."""
    lay = params.layout
    n = lay.n_ops
    grad = np.zeros(lay.dim)
    for value, op in _visited(task, traj):
        a = lay.op_set.index(op)
        p = step_distribution(params, task, value, cond)
        b = lay.base_offset(value)
        grad[b : b + n] -= p
        grad[b + a] += 1.0
        if cond.is_posterior:
            g = lay.goal_offset(cond.target, value)
            grad[g : g + n] -= p
            grad[g + a] += 1.0
    return grad
