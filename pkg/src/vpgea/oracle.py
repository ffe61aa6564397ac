"""Exact enumeration of a task's trajectory space.

Every quantity the theory talks about (prior and Bayes posterior tables,
expected utilities, the likelihood/utility covariance, the log expected
utility and its variational lower bound, the KL term) is computed here by
summing over all trajectories, in lexicographic action order, with
compensated summation. Probabilities are accumulated in log space.

A report can also be built straight from hand-written tables with
:func:`report_from_tables`, which is how the small hand-checked worlds are
expressed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .env import STOP, Task, Trajectory, WorldConfig, answer_log_probs, apply_op, execute, predicted_answer
from .errors import CapacityError, ConfigError, SupportError
from .policy import PRIOR, Conditioning, FeatureLayout, PolicyParams, action_scores, log_softmax
from .scoring import HyperParams, efficiency_coeff

DEFAULT_CAP = 10**6


@dataclass
class EnumerationReport:
    log_pi: np.ndarray
    log_L: np.ndarray
    lengths: np.ndarray
    eta: np.ndarray
    S: np.ndarray
    l_base: float
    log_q_theta: np.ndarray | None = None
    correct: np.ndarray | None = None
    trajectories: list[Trajectory] | None = None
    # derived scalars, filled by _finalize
    marginal: float = field(init=False)
    log_q: np.ndarray = field(init=False)
    e_pi_L: float = field(init=False)
    e_q_L: float = field(init=False)
    e_pi_S: float = field(init=False)
    e_q_S: float = field(init=False)
    var_pi_L: float = field(init=False)
    cov_pi_L_S: float = field(init=False)
    log_J: float = field(init=False)
    elbo_true_posterior: float = field(init=False)
    elbo_q_theta: float | None = field(init=False)
    kl_q_pi: float = field(init=False)

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)

    @property
    def L(self) -> np.ndarray:
        return np.exp(self.log_L)

    @property
    def q_true(self) -> np.ndarray:
        return np.exp(self.log_q)

    @property
    def q_theta(self) -> np.ndarray | None:
        return None if self.log_q_theta is None else np.exp(self.log_q_theta)

    def __len__(self):
        return len(self.log_pi)

    def _finalize(self):
        pi, L, S = self.pi, self.L, self.S
        self.marginal = math.fsum(pi * L)
        with np.errstate(divide="ignore"):
            self.log_q = self.log_pi + self.log_L - (math.log(self.marginal) if self.marginal > 0 else np.inf)
        q = self.q_true
        self.e_pi_L = self.marginal
        self.e_q_L = math.fsum(q * L)
        self.e_pi_S = math.fsum(pi * S)
        self.e_q_S = math.fsum(q * S)
        dL = L - self.e_pi_L
        self.var_pi_L = math.fsum(pi * dL * dL)
        self.cov_pi_L_S = math.fsum(pi * dL * (S - self.e_pi_S))
        self.log_J = compute_log_J(self)
        if self.marginal > 0:
            self.elbo_true_posterior = compute_elbo(self, "true")
            self.kl_q_pi = _kl_logs(self.log_q, self.log_pi)
        else:
            self.elbo_true_posterior = -math.inf
            self.kl_q_pi = math.nan
        self.elbo_q_theta = None if self.log_q_theta is None else compute_elbo(self, "q_theta")
        return self

    def expected(self, values: np.ndarray, dist: str = "pi") -> float:
        table = {"pi": self.pi, "q_true": self.q_true, "q_theta": self.q_theta}[dist]
        return math.fsum(table * np.asarray(values, dtype=np.float64))

    def scalars(self) -> dict:
        out = {
            "n_trajectories": len(self),
            "l_base": self.l_base,
            "marginal": self.marginal,
            "e_pi_L": self.e_pi_L,
            "e_q_L": self.e_q_L,
            "e_pi_S": self.e_pi_S,
            "e_q_S": self.e_q_S,
            "var_pi_L": self.var_pi_L,
            "cov_pi_L_S": self.cov_pi_L_S,
            "log_J": self.log_J,
            "elbo_true_posterior": self.elbo_true_posterior,
            "elbo_q_theta": self.elbo_q_theta,
            "kl_q_pi": self.kl_q_pi,
            "e_pi_length": self.expected(self.lengths),
        }
        if self.correct is not None:
            out["e_pi_accuracy"] = self.expected(self.correct)
        return out

    def table_rows(self) -> list[dict]:
        """Per-trajectory rows for CSV export."""
        rows = []
        q_theta = self.q_theta
        for i in range(len(self)):
            traj = self.trajectories[i] if self.trajectories else None
            rows.append(
                {
                    "actions": " ".join(traj.actions) if traj else str(i),
                    "final_value": traj.final_value if traj else "",
                    "length": int(self.lengths[i]),
                    "pi": float(np.exp(self.log_pi[i])),
                    "q_true": float(np.exp(self.log_q[i])),
                    "q_theta": "" if q_theta is None else float(q_theta[i]),
                    "L": float(np.exp(self.log_L[i])),
                    "eta": float(self.eta[i]),
                    "S": float(self.S[i]),
                }
            )
        return rows


def _eta_and_S(log_L, lengths, hp: HyperParams, l_base: float):
    eta = np.array([efficiency_coeff(l_base, float(n), hp) for n in lengths])
    return eta, np.exp(log_L) * eta


def report_from_tables(
    pi: Sequence[float],
    L: Sequence[float],
    lengths: Sequence[float],
    hp: HyperParams,
    l_base: float | None = None,
    q_theta: Sequence[float] | None = None,
) -> EnumerationReport:
    """Report for an explicitly tabulated world (probabilities, likelihoods,
    lengths). ``l_base`` defaults to the prior's expected length."""
    pi = np.asarray(pi, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)
    if abs(math.fsum(pi) - 1.0) > 1e-10:
        raise ValueError(f"prior table sums to {math.fsum(pi)}")
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
        log_L = np.log(np.asarray(L, dtype=np.float64))
        log_qt = None if q_theta is None else np.log(np.asarray(q_theta, dtype=np.float64))
    if l_base is None:
        l_base = math.fsum(pi * lengths)
    eta, S = _eta_and_S(log_L, lengths, hp, l_base)
    return EnumerationReport(log_pi, log_L, lengths, eta, S, float(l_base), log_qt)._finalize()


def _enumerate_logs(params: PolicyParams, task: Task, cond: Conditioning) -> dict[tuple, float]:
    world = task.world
    ops = world.op_set
    cache: dict[int, np.ndarray] = {}
    out: dict[tuple, float] = {}

    def lsm(v):
        r = cache.get(v)
        if r is None:
            r = cache[v] = log_softmax(action_scores(params, v, cond))
        return r

    def rec(value, prefix, acc):
        if len(prefix) == world.max_steps:
            out[prefix] = acc
            return
        row = lsm(value)
        for a, op in enumerate(ops):
            if op == STOP:
                out[prefix + (STOP,)] = acc + row[a]
            else:
                rec(apply_op(op, value), prefix + (op,), acc + row[a])

    rec(task.start_value, (), 0.0)
    return out


def enumerate_world(
    params: PolicyParams,
    task: Task,
    hp: HyperParams | None = None,
    cap: int = DEFAULT_CAP,
    l_base: float | None = None,
) -> EnumerationReport:
    """Exhaustive table over the task's trajectory space.

    ``l_base`` defaults to the exact prior expected length.
    """
    hp = hp or HyperParams()
    world = task.world
    size = world.trajectory_count()
    if size > cap:
        raise CapacityError(f"world has {size} trajectories, enumeration cap is {cap}")
    prior = _enumerate_logs(params, task, PRIOR)
    post = _enumerate_logs(params, task, Conditioning.posterior(task.reference_answer))
    target_idx = world.answer_grid.index(task.reference_answer)
    trajs, log_pi, log_qt, log_L, lengths, correct = [], [], [], [], [], []
    for actions, lp in prior.items():  # insertion order is lexicographic
        z = execute(task, actions)
        trajs.append(z)
        log_pi.append(lp)
        log_qt.append(post[actions])
        log_L.append(answer_log_probs(world, z.final_value)[target_idx])
        lengths.append(z.length)
        correct.append(predicted_answer(world, z.final_value) == task.reference_answer)
    log_pi = np.array(log_pi)
    lengths = np.array(lengths, dtype=np.float64)
    if l_base is None:
        l_base = math.fsum(np.exp(log_pi) * lengths)
    log_L = np.array(log_L)
    eta, S = _eta_and_S(log_L, lengths, hp, l_base)
    rep = EnumerationReport(
        log_pi, log_L, lengths, eta, S, float(l_base), np.array(log_qt), np.array(correct, dtype=np.float64), trajs
    )
    return rep._finalize()


def check_variance_identity(report: EnumerationReport) -> float:
    """|(E_q[L] - E_pi[L]) - Var_pi(L) / E_pi[L]| under the Bayes posterior."""
    if not report.marginal > 0:
        raise ValueError("marginal likelihood is zero; posterior undefined")
    lhs = report.e_q_L - report.e_pi_L
    rhs = report.var_pi_L / report.e_pi_L
    return abs(lhs - rhs)


class PropositionCheck(NamedTuple):
    cov: float
    gap: float
    identity_residual: float
    verdict: str  # "holds", "premise-fails" (cov < 0), or "violated"


def check_proposition1(report: EnumerationReport, tol: float = 1e-12) -> PropositionCheck:
    """Posterior utility gap against the likelihood/utility covariance.

    The gap E_q[S] - E_pi[S] must equal Cov_pi(L, S) / E_pi[L]; a
    non-negative covariance must give a non-negative gap.
    """
    if not report.marginal > 0:
        raise ValueError("marginal likelihood is zero; posterior undefined")
    cov = report.cov_pi_L_S
    gap = report.e_q_S - report.e_pi_S
    resid = abs(gap - cov / report.e_pi_L)
    if cov < 0:
        verdict = "premise-fails"
    else:
        verdict = "holds" if gap >= -tol else "violated"
    return PropositionCheck(cov, gap, resid, verdict)


def compute_log_J(report: EnumerationReport) -> float:
    """log E_pi[S]; -inf when every utility is zero."""
    return math.log(report.e_pi_S) if report.e_pi_S > 0 else -math.inf


def _kl_logs(log_q: np.ndarray, log_p: np.ndarray) -> float:
    q = np.exp(log_q)
    mask = q > 0
    if np.any(np.isneginf(log_p[mask])):
        return math.inf
    return math.fsum(q[mask] * (log_q[mask] - log_p[mask]))


def compute_kl(q: Sequence[float], p: Sequence[float]) -> float:
    """KL(q || p) = sum q log(q / p); +inf if q puts mass where p has none."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return _kl_logs(np.log(q), np.log(p))


def compute_elbo(report: EnumerationReport, sampling: str = "true") -> float:
    """E_q[log L + log eta] - KL(q || pi) for q the Bayes posterior
    (``"true"``) or the answer-conditioned policy stream (``"q_theta"``)."""
    if sampling == "true":
        log_q = report.log_q
    elif sampling == "q_theta":
        if report.log_q_theta is None:
            raise ValueError("report has no q_theta table")
        log_q = report.log_q_theta
    else:
        raise ValueError(f"unknown sampling distribution {sampling!r}")
    needed = (np.exp(report.log_pi) * report.S) > 0
    missing = needed & np.isneginf(log_q)
    if np.any(missing):
        i = int(np.flatnonzero(missing)[0])
        name = " ".join(report.trajectories[i].actions) if report.trajectories else f"#{i}"
        raise SupportError(f"sampling distribution {sampling!r} has no mass on trajectory {name}")
    q = np.exp(log_q)
    mask = q > 0
    with np.errstate(divide="ignore"):
        log_eta = np.log(report.eta)
    expected = math.fsum(q[mask] * (report.log_L[mask] + log_eta[mask]))
    return expected - _kl_logs(log_q, report.log_pi)


# --- hand-built worlds --------------------------------------------------------

TWO_PATH = {"pi": (0.5, 0.5), "L": (0.55, 0.5), "lengths": (10, 1)}


def two_path_report(hp: HyperParams, l_base: float = 5.0) -> EnumerationReport:
    """Correct-but-long versus near-correct-but-short, as bare tables."""
    return report_from_tables(TWO_PATH["pi"], TWO_PATH["L"], TWO_PATH["lengths"], hp, l_base=l_base)


def construct_negative_covariance_instance(hp: HyperParams, sharpness: float = 40.0) -> tuple[Task, PolicyParams]:
    """A task and policy whose enumeration shows Cov_pi(L, S) < 0.

    From start 10 the policy flips a fair coin between ten decrements to the
    answer 0 (length 10, L = 0.55) and one increment to 11 followed by STOP
    (length 1, L = 0.5, equidistant from both grid points). All other
    branches carry probability of order exp(-sharpness).
    """
    if hp.alpha < 1:
        raise ConfigError(f"construction needs alpha >= 1, got {hp.alpha}")
    l_base = 0.5 * 10 + 0.5 * 1
    eta_long = efficiency_coeff(l_base, 10, hp)
    eta_short = efficiency_coeff(l_base, 1, hp)
    if not 0.5 * eta_short > 0.55 * eta_long:
        raise ConfigError(
            f"clamp [{hp.eta_min}, {hp.eta_max}] leaves eta ratio {eta_short / eta_long:.4g} <= 1.1; "
            "the short path cannot out-score the correct one"
        )
    world = WorldConfig(
        start_value_range=(10, 10),
        answer_grid=(0, 22),
        op_set=("+1", "-1", STOP),
        max_steps=10,
        kappa=math.log(11 / 9) / 22,  # L(0) = 1 / (1 + 9/11) = 0.55
    )
    task = Task(start_value=10, reference_answer=0, world=world, task_id=0)
    lay = FeatureLayout.for_world(world)
    w = np.zeros(lay.dim)
    inc, dec, stop = (world.op_index[o] for o in ("+1", "-1", STOP))
    w[lay.base_offset(10) + stop] = -sharpness
    for v in range(1, 10):
        w[lay.base_offset(v) + dec] = sharpness
    w[lay.base_offset(11) + stop] = sharpness
    return task, PolicyParams(w, lay)


def monte_carlo_expected_utility(
    params: PolicyParams, task: Task, hp: HyperParams, l_base: float, n: int, seed: int
) -> tuple[float, float]:
    """Sampled estimate of E_pi[S] and its standard error."""
    from .policy import rollout_rng, sample_trajectories

    rng = rollout_rng(seed, 0, task.task_id, "oracle", 0)
    target_idx = task.world.answer_grid.index(task.reference_answer)
    vals = np.empty(n)
    lp_cache: dict[int, float] = {}
    for i, z in enumerate(sample_trajectories(params, task, PRIOR, [rng] * n)):
        if z.final_value not in lp_cache:
            lp_cache[z.final_value] = float(np.exp(answer_log_probs(task.world, z.final_value)[target_idx]))
        vals[i] = lp_cache[z.final_value] * efficiency_coeff(l_base, z.length, hp)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))
