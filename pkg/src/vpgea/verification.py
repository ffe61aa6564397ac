"""Sweep of exact theory checks over random enumerable worlds.

Each random world is a generated task on the default world with Gaussian
policy weights. The sweep reports, per check, whether it passed and the
worst residual seen.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .env import Task, WorldConfig, generate_task
from .oracle import (
    EnumerationReport,
    check_proposition1,
    check_variance_identity,
    construct_negative_covariance_instance,
    enumerate_world,
    two_path_report,
)
from .policy import PolicyParams
from .scoring import HyperParams

IDENTITY_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
BAYES_TOL = 1e-14
JENSEN_TIGHT_TOL = 1e-10
TWO_PATH_TOL = 1e-9
TWO_PATH_COV = -0.0090625
TWO_PATH_GAP = -0.0090625 / 0.525


def random_world(seed: int, index: int, world: WorldConfig | None = None) -> tuple[Task, PolicyParams]:
    world = world or WorldConfig()
    rng = np.random.default_rng([seed, index])
    task = generate_task(int(rng.integers(2**31)), world)
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    return task, PolicyParams.random(world, rng, scale)


def constant_utility_instance() -> tuple[Task, PolicyParams]:
    """Single-point answer grid, so L = 1 for every trajectory."""
    world = WorldConfig(start_value_range=(5, 5), answer_grid=(7,))
    return generate_task(0, world), PolicyParams.zeros(world)


def world_checks(rep: EnumerationReport) -> dict[str, float]:
    """Residuals for one enumerated world (all should be ~0 or <= 0)."""
    prop = check_proposition1(rep)
    return {
        "normalization_pi": abs(math.fsum(rep.pi) - 1.0),
        "normalization_q_theta": abs(math.fsum(rep.q_theta) - 1.0),
        "bayes_consistency": float(np.max(np.abs(rep.q_true * rep.marginal - rep.pi * rep.L))),
        "variance_identity": check_variance_identity(rep),
        "proposition1_identity": prop.identity_residual,
        # positive values are violations
        "proposition1_sign": -prop.gap if prop.cov >= 0 else -math.inf,
        "jensen_true_posterior": rep.elbo_true_posterior - rep.log_J,
        "jensen_q_theta": rep.elbo_q_theta - rep.log_J,
        "accuracy_advantage": rep.e_pi_L - rep.e_q_L,
        "kl_nonnegative": -rep.kl_q_pi,
    }


_LIMITS = {
    "normalization_pi": NORMALIZATION_TOL,
    "normalization_q_theta": NORMALIZATION_TOL,
    "bayes_consistency": BAYES_TOL,
    "variance_identity": IDENTITY_TOL,
    "proposition1_identity": IDENTITY_TOL,
    "proposition1_sign": IDENTITY_TOL,
    "jensen_true_posterior": IDENTITY_TOL,
    "jensen_q_theta": IDENTITY_TOL,
    "accuracy_advantage": 0.0,
    "kl_nonnegative": 0.0,
}


def run_theory_checks(seed: int = 0, n_worlds: int = 100, hp: HyperParams | None = None) -> dict:
    hp = hp or HyperParams()
    worst = {k: -math.inf for k in _LIMITS}
    n_cov_nonneg = 0
    for i in range(n_worlds):
        task, params = random_world(seed, i)
        rep = enumerate_world(params, task, hp)
        n_cov_nonneg += rep.cov_pi_L_S >= 0
        for k, v in world_checks(rep).items():
            worst[k] = max(worst[k], v)
    checks = {
        k: {"passed": bool(worst[k] <= _LIMITS[k]), "max_residual": worst[k], "tolerance": _LIMITS[k]}
        for k in _LIMITS
    }

    hp_boundary = replace(hp, alpha=1.0, eta_min=0.5, eta_max=2.0)
    two = two_path_report(hp_boundary)
    task, params = construct_negative_covariance_instance(hp_boundary)
    env_two = enumerate_world(params, task, hp_boundary, l_base=5.0)
    boundary_err = max(
        abs(two.cov_pi_L_S - TWO_PATH_COV), abs(two.e_q_S - two.e_pi_S - TWO_PATH_GAP),
        abs(env_two.cov_pi_L_S - TWO_PATH_COV), abs(env_two.e_q_S - env_two.e_pi_S - TWO_PATH_GAP),
    )
    checks["boundary_counterexample"] = {
        "passed": bool(boundary_err <= TWO_PATH_TOL),
        "max_residual": boundary_err,
        "tolerance": TWO_PATH_TOL,
        "cov": two.cov_pi_L_S,
        "gap": two.e_q_S - two.e_pi_S,
    }

    const_task, const_params = constant_utility_instance()
    const = enumerate_world(const_params, const_task, replace(hp, alpha=0.0))
    tight = max(abs(const.elbo_true_posterior - const.log_J), abs(const.elbo_q_theta - const.log_J))
    checks["jensen_tight_constant_utility"] = {
        "passed": bool(tight <= JENSEN_TIGHT_TOL),
        "max_residual": tight,
        "tolerance": JENSEN_TIGHT_TOL,
    }
    return {
        "seed": seed,
        "worlds": n_worlds,
        "alpha": hp.alpha,
        "worlds_with_nonnegative_cov": int(n_cov_nonneg),
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks.values()),
    }
