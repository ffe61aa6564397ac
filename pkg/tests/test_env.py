import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brute_force_sequences, fold_ops
from vpgea.env import (
    SATURATION, STOP, Task, WorldConfig, answer_log_likelihood, answer_log_probs, apply_op,
    execute, generate_task, iter_action_sequences, iter_trajectories, predicted_answer,
    reachable_answers,
)
from vpgea.errors import ConfigError, GenerationError, InvalidActionError


def test_execute_arithmetic():
    t = execute(Task(3, 8), ["+1", "*2", STOP])
    assert (t.final_value, t.length) == (8, 2)


def test_execute_stop_only_has_length_floor():
    t = execute(Task(5, 5), [STOP])
    assert (t.final_value, t.length) == (5, 1)


def test_execute_full_budget_without_stop():
    w = WorldConfig(max_steps=3)
    t = execute(Task(0, 6, w), ["+2", "+2", "+2"])
    assert (t.final_value, t.length) == (6, 3)


def test_execute_rejects_unknown_action():
    with pytest.raises(InvalidActionError):
        execute(Task(0, 1), ["-1"])  # not in the default op_set


def test_execute_rejects_overlong_and_post_stop():
    with pytest.raises(InvalidActionError):
        execute(Task(0, 1), ["+1"] * 5)
    with pytest.raises(InvalidActionError):
        execute(Task(0, 1), [STOP, "+1"])


def test_execute_is_pure():
    task = Task(4, 9)
    assert execute(task, ["*2", "+1"]) == execute(task, ["*2", "+1"])


def test_saturation():
    assert apply_op("*2", SATURATION) == SATURATION
    assert apply_op("-1", -SATURATION) == -SATURATION


def test_enumeration_matches_brute_force(world):
    ours = list(iter_action_sequences(world))
    ref = brute_force_sequences(world)
    assert sorted(ours) == sorted(ref)
    assert len(ours) == world.trajectory_count() == 121


def test_trajectory_values_match_independent_fold(world):
    task = Task(7, 9, world)
    for traj in iter_trajectories(task):
        assert traj.final_value == fold_ops(7, traj.actions)


def test_generate_task_deterministic(world):
    assert generate_task(0, world) == generate_task(0, world)


def test_generate_task_single_reachable_answer():
    w = WorldConfig(start_value_range=(7, 7), answer_grid=(7,), op_set=(STOP,))
    assert generate_task(3, w).reference_answer == 7


def test_generated_tasks_are_reachable(world):
    for seed in range(1, 101):
        task = generate_task(seed, world)
        finals = {fold_ops(task.start_value, s) for s in brute_force_sequences(world)}
        assert task.reference_answer in finals
        assert task.reference_answer in world.answer_grid


def test_generate_task_fails_when_nothing_reachable():
    w = WorldConfig(start_value_range=(0, 0), answer_grid=(50,), op_set=("+1", STOP), max_steps=2)
    with pytest.raises(GenerationError):
        generate_task(0, w)


def test_reachable_answers_default(world):
    assert reachable_answers(world, 0)[:3] == [0, 1, 2]


def test_degenerate_grid_log_likelihood_is_zero():
    w = WorldConfig(start_value_range=(2, 2), answer_grid=(2,))
    assert answer_log_likelihood(Task(2, 2, w), execute(Task(2, 2, w), ["+1", STOP])) == 0.0


def test_five_point_grid_log_likelihood():
    w = WorldConfig(start_value_range=(2, 2), answer_grid=(0, 1, 2, 3, 4), kappa=1.0)
    traj = execute(Task(2, 2, w), [STOP])
    expected = -math.log(1 + 2 * math.exp(-1) + 2 * math.exp(-2))
    assert answer_log_likelihood(Task(2, 2, w), traj) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-0.6964, abs=5e-5)


def test_log_likelihood_symmetry():
    w = WorldConfig(start_value_range=(2, 2), answer_grid=(0, 1, 2, 3, 4), kappa=1.0)
    traj = execute(Task(2, 2, w), [STOP])
    assert answer_log_likelihood(Task(2, 1, w), traj) == answer_log_likelihood(Task(2, 3, w), traj)


@given(st.integers(-30, 60), st.floats(0.1, 5.0))
def test_answer_head_normalizes_and_peaks(final_value, kappa):
    w = WorldConfig(kappa=kappa)
    p = np.exp(answer_log_probs(w, final_value))
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
    best = w.answer_grid[int(np.argmax(p))]
    assert best == predicted_answer(w, final_value)
    if w.answer_grid[0] <= final_value <= w.answer_grid[-1]:
        assert best == final_value


def test_world_config_validation_and_round_trip():
    w = WorldConfig(max_steps=3, kappa=1.5)
    assert WorldConfig.from_dict(w.to_dict()) == w
    with pytest.raises(ConfigError):
        WorldConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        WorldConfig(op_set=("+1", "^2"))
    with pytest.raises(ConfigError):
        WorldConfig(kappa=0.0)
