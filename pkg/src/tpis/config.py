"""Run configuration: seeds, policy knobs, per-learner hyperparameter
overrides and paths. Loaded from a JSON file; unknown keys are rejected."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .learners import LearnerKind, LearnerSpec
from .pipeline import TpisConfig, default_config


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    folds: int = 10
    epsilon: float = 0.4
    route_threshold: float = 0.51
    runs: int = 30
    train_per_class: int = 60
    learners: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    spec_path: str | None = None
    model_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8430

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must be in (0, 1)")
        if self.route_threshold < 0.0:
            raise ConfigError("route_threshold must be >= 0")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.train_per_class < 1:
            raise ConfigError("train_per_class must be >= 1")
        if not (0 < self.port < 65536):
            raise ConfigError("port must be in 1..65535")
        for kind_name, params in self.learners.items():
            try:
                kind = LearnerKind(kind_name)
            except ValueError:
                raise ConfigError(f"unknown learner kind {kind_name!r}") from None
            try:
                LearnerSpec(kind, dict(params))
            except ValueError as exc:
                raise ConfigError(f"bad {kind_name} hyperparameters: {exc}") from exc

    def tpis_config(self) -> TpisConfig:
        return default_config(
            seed=self.seed,
            epsilon=self.epsilon,
            route_threshold=self.route_threshold,
            folds=self.folds,
            learner_overrides=self.learners,
        )


def load_run_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
