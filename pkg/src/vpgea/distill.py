"""Policy-gradient and gated-distillation gradients, plus the AdamW update.

Advantages are treated as constants. The distillation term carries the
posterior log-probability only as a stop-gradient constant, so its gradient
flows through the prior stream alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .policy import PRIOR, Conditioning, PolicyParams, grad_log_prob, log_prob
from .scoring import GroupBatch


@dataclass(frozen=True)
class GradientBundle:
    pg_grad: np.ndarray
    distill_grad: np.ndarray
    total_grad: np.ndarray
    pg_loss: float = 0.0
    distill_loss: float = 0.0
    total_loss: float = 0.0


def pg_gradient(params: PolicyParams, batch: GroupBatch) -> tuple[np.ndarray, float]:
    """Gradient and value of -(1/G) sum_i A_i log q(z_i | x, y*)."""
    cond = Conditioning.posterior(batch.task.reference_answer)
    G = len(batch.posterior_paths)
    grad = np.zeros(params.layout.dim)
    terms = []
    for z, rec in zip(batch.posterior_paths, batch.records):
        if rec.advantage == 0.0:
            continue
        grad -= rec.advantage * grad_log_prob(params, batch.task, z, cond)
        terms.append(rec.advantage * log_prob(params, batch.task, z, cond))
    return grad / G, -math.fsum(terms) / G


def distill_gradient(params: PolicyParams, batch: GroupBatch, gate_all: bool = False) -> tuple[np.ndarray, float]:
    """Advantage-gated forward-KL estimate over the posterior paths.

    Only paths with strictly positive advantage enter (every path when
    ``gate_all``). The loss is (1/G) sum gate * (sg[log q] - log pi); its
    gradient is -(1/G) sum gate * grad log pi.
    """
    cond = Conditioning.posterior(batch.task.reference_answer)
    G = len(batch.posterior_paths)
    grad = np.zeros(params.layout.dim)
    terms = []
    for z, rec in zip(batch.posterior_paths, batch.records):
        if not (gate_all or rec.advantage > 0):
            continue
        log_q = log_prob(params, batch.task, z, cond)  # constant: no gradient taken
        terms.append(log_q - log_prob(params, batch.task, z, PRIOR))
        grad -= grad_log_prob(params, batch.task, z, PRIOR)
    return grad / G, math.fsum(terms) / G


def total_gradient(
    pg: np.ndarray, distill: np.ndarray, beta: float, pg_loss: float = 0.0, distill_loss: float = 0.0
) -> GradientBundle:
    pg = np.asarray(pg, dtype=np.float64)
    distill = np.asarray(distill, dtype=np.float64)
    if pg.shape != distill.shape:
        raise ValueError(f"gradient shapes differ: {pg.shape} vs {distill.shape}")
    return GradientBundle(
        pg_grad=pg,
        distill_grad=distill,
        total_grad=pg + beta * distill,
        pg_loss=pg_loss,
        distill_loss=distill_loss,
        total_loss=pg_loss + beta * distill_loss,
    )


@dataclass
class OptimizerState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def zeros(cls, dim: int, **hyper) -> "OptimizerState":
        return cls(np.zeros(dim), np.zeros(dim), **hyper)

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.first_moment.copy(), self.second_moment.copy(), self.step_count,
            self.beta1, self.beta2, self.eps, self.weight_decay,
        )


def clip_by_norm(grad: np.ndarray, max_norm: float | None) -> np.ndarray:
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad))
    return grad * (max_norm / norm) if norm > max_norm else grad


def optimizer_step(
    params: PolicyParams, grad: np.ndarray, state: OptimizerState, lr: float
) -> tuple[PolicyParams, OptimizerState]:
    """One AdamW step (decoupled weight decay, bias-corrected moments).

    Returns new objects; the inputs are left untouched.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise NumericError(f"non-finite gradient at indices {bad[:10].tolist()}")
    s = state.copy()
    s.step_count += 1
    t = s.step_count
    s.first_moment = s.beta1 * s.first_moment + (1 - s.beta1) * grad
    s.second_moment = s.beta2 * s.second_moment + (1 - s.beta2) * grad * grad
    m_hat = s.first_moment / (1 - s.beta1**t)
    v_hat = s.second_moment / (1 - s.beta2**t)
    w = params.weights * (1 - lr * s.weight_decay)
    w = w - lr * m_hat / (np.sqrt(v_hat) + s.eps)
    if not np.all(np.isfinite(w)):
        raise NumericError("parameters became non-finite after optimizer step")
    return params.replace(w), s
