import numpy as np
import pytest

from conftest import central_diff, rel_err
from vpgea.distill import (
    OptimizerState, clip_by_norm, distill_gradient, optimizer_step, pg_gradient, total_gradient,
)
from vpgea.env import STOP, Task, execute, generate_task
from vpgea.errors import NumericError
from vpgea.policy import PRIOR, Conditioning, PolicyParams, grad_log_prob, log_prob, sample_trajectories
from vpgea.scoring import GroupBatch, HyperParams, UtilityRecord, score_group


def batch_with_advantages(task, paths, advantages):
    recs = [UtilityRecord(0.0, 0.0, 1.0, 0.0, float(a)) for a in advantages]
    return GroupBatch(task, list(paths), list(paths), 1.0, 0.0, recs)


def random_batch(world, rng, G=4):
    params = PolicyParams.random(world, rng, float(rng.uniform(0.3, 1.5)))
    task = generate_task(int(rng.integers(10_000)), world)
    post = sample_trajectories(params, task, Conditioning.posterior(task.reference_answer), rng.spawn(G))
    return params, batch_with_advantages(task, post, rng.normal(size=G))


# --- policy-gradient term ---


def test_pg_zero_advantages(world, rng):
    params = PolicyParams.random(world, rng)
    task = Task(3, 7, world)
    paths = [execute(task, ["+1", STOP]), execute(task, ["*2", STOP])]
    g, loss = pg_gradient(params, batch_with_advantages(task, paths, [0, 0]))
    assert not np.any(g) and loss == 0.0


def test_pg_opposite_advantages_cancel(world, rng):
    params = PolicyParams.random(world, rng)
    task = Task(3, 7, world)
    z = execute(task, ["+2", "+2", STOP])
    g, _ = pg_gradient(params, batch_with_advantages(task, [z, z], [1, -1]))
    assert np.allclose(g, 0, atol=1e-15)


def test_pg_matches_finite_differences(world):
    rng = np.random.default_rng(8)
    for _ in range(50):
        params, batch = random_batch(world, rng)
        cond = Conditioning.posterior(batch.task.reference_answer)
        A = batch.advantages
        f = lambda w: -sum(a * log_prob(params.replace(w), batch.task, z, cond)
                           for a, z in zip(A, batch.posterior_paths)) / len(A)
        g, loss = pg_gradient(params, batch)
        assert loss == pytest.approx(f(params.weights), abs=1e-12)
        assert rel_err(g, central_diff(f, params.weights.copy())) <= 1e-6


# --- distillation term ---


def test_distill_empty_gate(world, rng):
    params, batch = random_batch(world, rng)
    batch = batch_with_advantages(batch.task, batch.posterior_paths, [-1.0, 0.0, -0.3, 0.0])
    g, loss = distill_gradient(params, batch)
    assert not np.any(g) and loss == 0.0


def test_distill_single_gated_path(world, rng):
    params, batch = random_batch(world, rng)
    batch = batch_with_advantages(batch.task, batch.posterior_paths, [-1.0, 0.7, 0.0, -0.2])
    g, _ = distill_gradient(params, batch)
    z = batch.posterior_paths[1]
    assert np.array_equal(g, -grad_log_prob(params, batch.task, z, PRIOR) / 4)


def test_distill_matches_finite_differences(world):
    rng = np.random.default_rng(9)
    for _ in range(50):
        params, batch = random_batch(world, rng)
        gate = batch.advantages > 0
        t = batch.task
        log_q = [log_prob(params, t, z, Conditioning.posterior(t.reference_answer)) for z in batch.posterior_paths]
        f = lambda w: sum(
            (lq - log_prob(params.replace(w), t, z, PRIOR)) * k
            for lq, z, k in zip(log_q, batch.posterior_paths, gate)
        ) / len(gate)
        g, loss = distill_gradient(params, batch)
        assert loss == pytest.approx(f(params.weights), abs=1e-12)
        assert rel_err(g, central_diff(f, params.weights.copy())) <= 1e-6


def test_distill_goal_block_is_exactly_zero(world):
    rng = np.random.default_rng(10)
    for _ in range(30):
        params, batch = random_batch(world, rng)
        for gate_all in (False, True):
            g, _ = distill_gradient(params, batch, gate_all=gate_all)
            assert not np.any(g[params.layout.n_base:])


def test_distill_unchanged_when_goal_weights_move(world, rng):
    params, batch = random_batch(world, rng)
    w = params.weights.copy()
    w[params.layout.n_base:] += rng.normal(size=w.size - params.layout.n_base)
    g1, _ = distill_gradient(params, batch)
    g2, _ = distill_gradient(params.replace(w), batch)
    assert np.array_equal(g1, g2)


def test_gate_ignores_non_positive_paths(world, rng):
    params, batch = random_batch(world, rng)
    paths = batch.posterior_paths
    a = batch_with_advantages(batch.task, paths, [0.5, -1.0, 0.0, 1.2])
    extra = execute(batch.task, [STOP])
    b = batch_with_advantages(batch.task, paths[:3] + [extra], [0.5, -1.0, 0.0, -3.0])
    c = batch_with_advantages(batch.task, paths[:3] + [extra], [0.5, -1.0, 0.0, 0.0])
    assert np.array_equal(distill_gradient(params, b)[0], distill_gradient(params, c)[0])
    assert not np.array_equal(distill_gradient(params, a)[0], distill_gradient(params, b)[0])


def test_all_filtered_group_gives_zero_total_gradient(world, rng):
    params = PolicyParams.random(world, rng)
    task = Task(5, 5, world)
    paths = [execute(task, [STOP])] * 4
    batch = score_group(task, paths, paths, HyperParams())
    pg, _ = pg_gradient(params, batch)
    dg, _ = distill_gradient(params, batch)
    assert not np.any(total_gradient(pg, dg, 1.0).total_grad)


# --- combination ---


def test_total_gradient_examples():
    pg, dg = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.array_equal(total_gradient(pg, dg, 0.0).total_grad, pg)
    assert np.array_equal(total_gradient(pg, dg, 1.0).total_grad, pg + dg)
    assert np.array_equal(total_gradient(pg, dg, 2.0).total_grad, [1.0, 2.0])
    b = total_gradient(pg, dg, 2.0, pg_loss=0.5, distill_loss=0.25)
    assert b.total_loss == 1.0
    with pytest.raises(ValueError):
        total_gradient(pg, np.zeros(3), 1.0)


def test_total_gradient_linear_in_beta(rng):
    pg, dg = rng.normal(size=7), rng.normal(size=7)
    t1, t3 = total_gradient(pg, dg, 1.0).total_grad, total_gradient(pg, dg, 3.0).total_grad
    assert np.array_equal(t3 - pg, 3.0 * dg) or np.allclose(t3 - pg, 3 * (t1 - pg), atol=1e-15)


# --- optimizer ---


def test_zero_gradient_leaves_params(world, rng):
    params = PolicyParams.random(world, rng)
    new, state = optimizer_step(params, np.zeros(params.layout.dim), OptimizerState.zeros(params.layout.dim), 0.05)
    assert np.array_equal(new.weights, params.weights) and state.step_count == 1


def test_first_step_moves_against_gradient_sign(world, rng):
    params = PolicyParams.zeros(world)
    g = rng.normal(size=params.layout.dim)
    new, _ = optimizer_step(params, g, OptimizerState.zeros(params.layout.dim), 0.05)
    assert np.array_equal(np.sign(new.weights), -np.sign(g))
    assert np.allclose(np.abs(new.weights), 0.05 * np.abs(g) / (np.abs(g) + 1e-8), rtol=1e-12)


def run_quadratic(params, target, steps, lr=0.05):
    state = OptimizerState.zeros(params.layout.dim)
    for _ in range(steps):
        params, state = optimizer_step(params, params.weights - target, state, lr)
    return params


def test_quadratic_converges_from_nearby_start(world, rng):
    params = PolicyParams.zeros(world)
    target = rng.uniform(-0.2, 0.2, params.layout.dim)
    out = run_quadratic(params, target, 100)
    assert np.max(np.abs(out.weights - target)) < 1e-3


def test_quadratic_converges_from_far_start(world, rng):
    params = PolicyParams.zeros(world)
    target = rng.uniform(-1.0, 1.0, params.layout.dim)
    out = run_quadratic(params, target, 300)
    assert np.max(np.abs(out.weights - target)) < 1e-3


def test_weight_decay_is_decoupled(world, rng):
    params = PolicyParams.random(world, rng)
    state = OptimizerState.zeros(params.layout.dim, weight_decay=0.1)
    new, _ = optimizer_step(params, np.zeros(params.layout.dim), state, 0.05)
    assert np.allclose(new.weights, params.weights * (1 - 0.05 * 0.1), atol=1e-15)


def test_optimizer_does_not_mutate_inputs(world, rng):
    params = PolicyParams.random(world, rng)
    state = OptimizerState.zeros(params.layout.dim)
    before = params.weights.copy()
    optimizer_step(params, rng.normal(size=params.layout.dim), state, 0.05)
    assert np.array_equal(params.weights, before) and state.step_count == 0 and not state.first_moment.any()


def test_non_finite_gradient_aborts(world):
    params = PolicyParams.zeros(world)
    g = np.zeros(params.layout.dim)
    g[3] = np.inf
    with pytest.raises(NumericError, match="indices"):
        optimizer_step(params, g, OptimizerState.zeros(params.layout.dim), 0.05)


def test_clip_by_norm():
    g = np.array([3.0, 4.0])
    assert np.array_equal(clip_by_norm(g, None), g)
    assert np.allclose(clip_by_norm(g, 1.0), [0.6, 0.8])
    assert np.array_equal(clip_by_norm(g, 10.0), g)
