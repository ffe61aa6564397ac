import itertools

import numpy as np
import pytest

from vpgea.env import STOP, Task, WorldConfig


@pytest.fixture
def world():
    return WorldConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_sequences(world: WorldConfig):
    """Every complete action sequence, built with itertools instead of the
    library's recursive walk."""
    moves = [op for op in world.op_set if op != STOP]
    out = []
    for n in range(world.max_steps + 1):
        for prefix in itertools.product(moves, repeat=n):
            out.append(prefix if n == world.max_steps else prefix + (STOP,))
    if STOP not in world.op_set:
        out = [s for s in out if len(s) == world.max_steps]
    return out


def fold_ops(start: int, actions) -> int:
    v = start
    for a in actions:
        if a == "+1":
            v += 1
        elif a == "+2":
            v += 2
        elif a == "-1":
            v -= 1
        elif a == "*2":
            v *= 2
    return v


def central_diff(f, w: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def small_task(world=None, start=3, target=7):
    return Task(start, target, world or WorldConfig())


# --- acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
