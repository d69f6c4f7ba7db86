"""JSON run configuration.

Schema (all sections optional except ``seed`` and ``train.total_env_steps``;
omitted fields take the dataclass defaults)::

    {
      "seed": 7,
      "dynamics": {DynamicsParams fields; angles in radians},
      "env":      {EnvConfig fields},
      "mpc":      {MpcConfig fields},
      "train":    {TrainConfig fields, "total_env_steps" required},
      "vanilla":  {TrainConfig fields for the joint-action DQN baseline},
      "tasks":    {TaskGenConfig fields},
      "eval":     {"radius": 0.1}
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .dynamics import DynamicsParams
from .env import EnvConfig
from .mpc import MpcConfig
from .scheduler import TrainConfig
from .tasks import TaskGenConfig

REQUIRED = ("seed", "train.total_env_steps")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass
class Settings:
    seed: int = 0
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    vanilla: TrainConfig = field(default_factory=lambda: TrainConfig(total_env_steps=100_000))
    tasks: TaskGenConfig = field(default_factory=TaskGenConfig)
    radius: float = 0.1


_SECTIONS = {
    "dynamics": DynamicsParams,
    "env": EnvConfig,
    "mpc": MpcConfig,
    "train": TrainConfig,
    "vanilla": TrainConfig,
    "tasks": TaskGenConfig,
}


def _build(section: str, cls, values, defaults=None):
    if not isinstance(values, dict):
        raise ConfigError(f"config section {section!r} must be an object", section)
    names = {f.name for f in fields(cls)}
    for key in values:
        if key not in names:
            raise ConfigError(f"unknown config key {section}.{key}", f"{section}.{key}")
    kwargs = {} if defaults is None else {f.name: getattr(defaults, f.name) for f in fields(cls)}
    for key, val in values.items():
        kwargs[key] = tuple(val) if isinstance(val, list) else val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} config: {exc}", section) from exc


def settings_from_dict(raw: dict) -> Settings:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in REQUIRED:
        node = raw
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"missing required config key {key!r}", key)
            node = node[part]
    allowed = {"seed", "eval", *_SECTIONS}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r}", key)
    s = Settings(seed=int(raw["seed"]))
    for name, cls in _SECTIONS.items():
        if name in raw:
            setattr(s, name, _build(name, cls, raw[name], getattr(s, name)))
    ev = raw.get("eval", {})
    for key in ev:
        if key != "radius":
            raise ConfigError(f"unknown config key eval.{key}", f"eval.{key}")
    s.radius = float(ev.get("radius", s.radius))
    return s


def load_config(path) -> Settings:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return settings_from_dict(raw)
