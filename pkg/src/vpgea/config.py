"""Experiment config files.

Flat-sectioned TOML::

    [world]   start_value_range, answer_grid, op_set, max_steps, kappa
    [hp]      alpha, beta, eta_min, eta_max, group_size, z_eps, learning_rate, baseline_scope
    [train]   iterations, tasks_per_batch, ..., ablation flags

Missing keys take their defaults; unknown keys are a config error. Dumping a
loaded config gives a canonical form (every key, sorted), so load -> dump is
idempotent.
"""

from __future__ import annotations

import sys
from dataclasses import fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .env import WorldConfig
from .errors import ConfigError
from .scoring import HyperParams
from .trainer import TrainConfig

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"world", "hp"}


def config_from_dict(d: dict) -> TrainConfig:
    extra = set(d) - {"world", "hp", "train"}
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    train = dict(d.get("train", {}))
    unknown = set(train) - _TRAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown train keys: {sorted(unknown)}")
    try:
        world = WorldConfig.from_dict(d.get("world", {}))
        hp = HyperParams.from_dict(d.get("hp", {}))
        return TrainConfig(world=world, hp=hp, **train)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: TrainConfig) -> dict:
    train = {k: getattr(cfg, k) for k in sorted(_TRAIN_KEYS)}
    if train["max_grad_norm"] is None:
        del train["max_grad_norm"]  # TOML has no null
    return {
        "world": dict(sorted(cfg.world.to_dict().items())),
        "hp": dict(sorted(cfg.hp.to_dict().items())),
        "train": train,
    }


def loads(text: str) -> TrainConfig:
    try:
        return config_from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc


def dumps(cfg: TrainConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def load(source: str | Path) -> TrainConfig:
    """Load a config file; the literal name ``default`` gives the defaults."""
    if str(source) == "default":
        return TrainConfig()
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return loads(path.read_text())
