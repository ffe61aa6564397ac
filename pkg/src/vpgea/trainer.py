"""Training loop: dual-stream generation, cross-view scoring, gradient step.

Each iteration draws a batch of tasks from a fixed training pool, samples G
prior and G posterior rollouts per task, scores the posterior rollouts
against the prior ones, and takes one AdamW step on the task-averaged
gradient. Rollout randomness is keyed on (seed, iteration, task, stream,
index), so a (config, seed) pair determines the whole log.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .distill import OptimizerState, clip_by_norm, distill_gradient, optimizer_step, pg_gradient, total_gradient
from .env import STOP, Task, WorldConfig, answer_log_likelihood, generate_task, predicted_answer
from .errors import ConfigError, NumericError
from .oracle import enumerate_world
from .policy import PRIOR, Conditioning, PolicyParams, rollout_rng, sample_trajectories
from .scoring import HyperParams, score_group

logger = logging.getLogger(__name__)

LOG_COLUMNS = (
    "iteration", "prior_len_mean", "post_len_mean", "prior_acc", "post_acc",
    "pg_loss", "distill_loss", "s_hat_mean", "gated_frac",
)
EVAL_COLUMNS = ("iteration", "prior_len", "post_len", "prior_acc", "post_acc")
EVAL_TASK_OFFSET = 1_000_000


@dataclass(frozen=True)
class TrainConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    hp: HyperParams = field(default_factory=HyperParams)
    iterations: int = 300
    tasks_per_batch: int = 16
    task_pool_size: int = 512
    eval_every: int = 50
    eval_task_count: int = 64
    seed: int = 0
    init_stop_logit: float = -1.0
    disable_distill: bool = False
    disable_efficiency: bool = False
    disable_posterior_pg: bool = False
    freeze_gate: bool = False
    max_grad_norm: float | None = None
    weight_decay: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if not 1 <= self.tasks_per_batch <= self.task_pool_size:
            raise ConfigError("need 1 <= tasks_per_batch <= task_pool_size")
        if self.eval_task_count < 1:
            raise ConfigError("eval_task_count must be >= 1")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ConfigError("max_grad_norm must be > 0 when set")

    def effective_hp(self) -> HyperParams:
        hp = self.hp
        if self.disable_efficiency:
            hp = replace(hp, alpha=0.0)
        if self.disable_distill:
            hp = replace(hp, beta=0.0)
        return hp

    def to_dict(self) -> dict:
        d = asdict(self)
        d["world"] = self.world.to_dict()
        d["hp"] = self.hp.to_dict()
        return d


@dataclass(frozen=True)
class StepStats:
    prior_len_mean: float
    post_len_mean: float
    prior_acc: float
    post_acc: float
    pg_loss: float
    distill_loss: float
    s_hat_mean: float
    gated_frac: float


@dataclass
class TrainingLog:
    rows: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    params: PolicyParams | None = None
    aborted: str | None = None

    def to_csv(self) -> str:
        return _csv(LOG_COLUMNS, self.rows)

    def evals_to_csv(self) -> str:
        return _csv(EVAL_COLUMNS, self.evals)


class TrainingAborted(NumericError):
    def __init__(self, message: str, log: TrainingLog):
        super().__init__(message)
        self.log = log


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _is_correct(task: Task, z) -> bool:
    return predicted_answer(task.world, z.final_value) == task.reference_answer


def batch_gradient(
    params: PolicyParams,
    tasks: list[Task],
    hp: HyperParams,
    *,
    seed: int = 0,
    iteration: int = 0,
    pg_enabled: bool = True,
    gate_all: bool = False,
) -> tuple[np.ndarray, StepStats]:
    """Task-averaged total gradient for one batch, plus its statistics."""
    G = hp.group_size
    rollouts = []
    for t in tasks:
        prior = sample_trajectories(
            params, t, PRIOR, [rollout_rng(seed, iteration, t.task_id, "prior", j) for j in range(G)]
        )
        post = sample_trajectories(
            params, t, Conditioning.posterior(t.reference_answer),
            [rollout_rng(seed, iteration, t.task_id, "posterior", j) for j in range(G)],
        )
        rollouts.append((t, prior, post))

    batch_baseline = None
    if hp.baseline_scope == "batch":
        batch_baseline = math.fsum(
            answer_log_likelihood(t, z) for t, prior, _ in rollouts for z in prior
        ) / (G * len(rollouts))

    dim = params.layout.dim
    grad_sum = np.zeros(dim)
    pg_losses, distill_losses, s_hats, gated = [], [], [], 0
    for t, prior, post in rollouts:
        batch = score_group(t, prior, post, hp, u_prior_mean=batch_baseline)
        if pg_enabled:
            pg, pg_loss = pg_gradient(params, batch)
        else:
            pg, pg_loss = np.zeros(dim), 0.0
        if hp.beta > 0:
            dg, d_loss = distill_gradient(params, batch, gate_all=gate_all)
        else:
            dg, d_loss = np.zeros(dim), 0.0
        bundle = total_gradient(pg, dg, hp.beta, pg_loss, d_loss)
        grad_sum += bundle.total_grad
        pg_losses.append(pg_loss)
        distill_losses.append(d_loss)
        s_hats.extend(r.s_hat for r in batch.records)
        gated += sum(1 for r in batch.records if gate_all or r.advantage > 0)

    n_paths = G * len(tasks)
    stats = StepStats(
        prior_len_mean=float(np.mean([z.length for _, p, _ in rollouts for z in p])),
        post_len_mean=float(np.mean([z.length for _, _, q in rollouts for z in q])),
        prior_acc=sum(_is_correct(t, z) for t, p, _ in rollouts for z in p) / n_paths,
        post_acc=sum(_is_correct(t, z) for t, _, q in rollouts for z in q) / n_paths,
        pg_loss=math.fsum(pg_losses) / len(tasks),
        distill_loss=math.fsum(distill_losses) / len(tasks),
        s_hat_mean=math.fsum(s_hats) / n_paths,
        gated_frac=gated / n_paths,
    )
    return grad_sum / len(tasks), stats


def train_step(
    params: PolicyParams,
    tasks: list[Task],
    hp: HyperParams,
    opt_state: OptimizerState,
    *,
    seed: int = 0,
    iteration: int = 0,
    pg_enabled: bool = True,
    gate_all: bool = False,
    max_grad_norm: float | None = None,
) -> tuple[PolicyParams, OptimizerState, StepStats]:
    grad, stats = batch_gradient(
        params, tasks, hp, seed=seed, iteration=iteration, pg_enabled=pg_enabled, gate_all=gate_all
    )
    grad = clip_by_norm(grad, max_grad_norm)
    new_params, new_state = optimizer_step(params, grad, opt_state, hp.learning_rate)
    return new_params, new_state, stats


def evaluate_policy(
    params: PolicyParams,
    tasks: list[Task],
    stream: str = "prior",
    *,
    seed: int = 0,
    samples_per_task: int = 16,
    exact: bool = False,
) -> tuple[float, float]:
    """(accuracy, mean length) of argmax answers for one stream.

    Sampled with a fixed evaluation stream by default; ``exact=True`` returns
    the enumerated expectations instead.
    """
    if not tasks:
        raise ValueError("evaluation needs at least one task")
    if stream not in ("prior", "posterior"):
        raise ValueError(f"unknown stream {stream!r}")
    if exact:
        accs, lens = [], []
        dist = "pi" if stream == "prior" else "q_theta"
        for t in tasks:
            rep = enumerate_world(params, t)
            accs.append(rep.expected(rep.correct, dist))
            lens.append(rep.expected(rep.lengths, dist))
        return math.fsum(accs) / len(tasks), math.fsum(lens) / len(tasks)
    correct, lengths = 0, []
    for t in tasks:
        cond = PRIOR if stream == "prior" else Conditioning.posterior(t.reference_answer)
        rngs = [rollout_rng(seed, 0, t.task_id, "eval", j) for j in range(samples_per_task)]
        for z in sample_trajectories(params, t, cond, rngs):
            correct += _is_correct(t, z)
            lengths.append(z.length)
    return correct / len(lengths), float(np.mean(lengths))


def training_tasks(config: TrainConfig) -> list[Task]:
    return [generate_task(i, config.world) for i in range(config.task_pool_size)]


def eval_tasks(config: TrainConfig) -> list[Task]:
    return [generate_task(EVAL_TASK_OFFSET + i, config.world) for i in range(config.eval_task_count)]


def _eval_row(params, tasks, iteration) -> dict:
    prior_acc, prior_len = evaluate_policy(params, tasks, "prior", exact=True)
    post_acc, post_len = evaluate_policy(params, tasks, "posterior", exact=True)
    return {"iteration": iteration, "prior_len": prior_len, "post_len": post_len,
            "prior_acc": prior_acc, "post_acc": post_acc}


def initial_params(config: TrainConfig) -> PolicyParams:
    """Zero weights except a shared STOP logit on every value bucket; a
    negative value gives a verbose starting prior."""
    params = PolicyParams.zeros(config.world)
    lay = params.layout
    w = np.zeros(lay.dim)
    stop = lay.op_set.index(STOP)
    w[stop : lay.n_base : lay.n_ops] = config.init_stop_logit
    return params.replace(w)


def run_training(config: TrainConfig, params: PolicyParams | None = None) -> TrainingLog:
    """Fixed-budget training with exact evaluation on held-out tasks at
    iteration 0, every ``eval_every`` iterations, and at the end."""
    hp = config.effective_hp()
    pool = training_tasks(config)
    held_out = eval_tasks(config)
    params = params or initial_params(config)
    state = OptimizerState.zeros(
        params.layout.dim, beta1=config.adam_beta1, beta2=config.adam_beta2,
        eps=config.adam_eps, weight_decay=config.weight_decay,
    )
    log = TrainingLog()
    log.evals.append(_eval_row(params, held_out, 0))
    batch_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xBA7C]))
    for it in range(config.iterations):
        idx = batch_rng.choice(len(pool), size=config.tasks_per_batch, replace=False)
        tasks = [pool[i] for i in sorted(idx)]
        try:
            params, state, stats = train_step(
                params, tasks, hp, state, seed=config.seed, iteration=it,
                pg_enabled=not config.disable_posterior_pg, gate_all=config.freeze_gate,
                max_grad_norm=config.max_grad_norm,
            )
        except NumericError as exc:
            log.params = params
            log.aborted = f"iteration {it}: {exc}"
            raise TrainingAborted(log.aborted, log) from exc
        row = {"iteration": it, **asdict(stats)}
        if not all(math.isfinite(v) for v in asdict(stats).values()):
            log.params = params
            log.aborted = f"iteration {it}: non-finite statistics {row}"
            raise TrainingAborted(log.aborted, log)
        log.rows.append(row)
        done = it + 1
        if done % config.eval_every == 0 or done == config.iterations:
            log.evals.append(_eval_row(params, held_out, done))
            logger.info("iter %d: %s", done, log.evals[-1])
    log.params = params
    return log
