"""Binary base learners sharing one contract: fit on a complete normalized
feature matrix plus 0/1 labels (1 = TB), emit P(TB) for feature vectors.

Kinds: knn, logreg, linear_svm, decision_tree, random_forest, adaboost, gbt.
Every fit is deterministic given (spec, X, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

import numpy as np

from ..errors import ArchiveError
from .base import TrainedLearner, sigmoid
from .boosting import AdaBoostModel, GbtModel, fit_adaboost, fit_gbt
from .knn import KnnModel, fit_knn
from .linear import LinearSvmModel, LogRegModel, fit_linear_svm, fit_logreg, logreg_loss_and_grad, svm_objective
from .tree import DecisionTreeModel, RandomForestModel, fit_decision_tree, fit_random_forest


class LearnerKind(str, Enum):
    KNN = "knn"
    LOGREG = "logreg"
    LINEAR_SVM = "linear_svm"
    DECISION_TREE = "decision_tree"
    RANDOM_FOREST = "random_forest"
    ADABOOST = "adaboost"
    GBT = "gbt"


# Defaults were calibrated on synthetic cohorts at the project's working
# scale (around 120 training rows): deeper trees and k=5 neighbors overfit
# badly there, and logistic regression needs the longer schedule to converge.
_DEFAULTS: dict[LearnerKind, dict[str, Any]] = {
    LearnerKind.KNN: {"k": 15},
    LearnerKind.LOGREG: {"learning_rate": 0.5, "iterations": 2000, "l2": 1e-3},
    LearnerKind.LINEAR_SVM: {"c": 1.0, "epochs": 200, "batch_size": 16, "platt": False},
    LearnerKind.DECISION_TREE: {"max_depth": 3, "min_leaf": 2},
    LearnerKind.RANDOM_FOREST: {
        "n_trees": 100,
        "max_depth": 6,
        "min_leaf": 2,
        "bootstrap": True,
        "feature_subsample": "sqrt",
    },
    LearnerKind.ADABOOST: {"rounds": 100},
    LearnerKind.GBT: {"rounds": 100, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 2},
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _validate_params(kind: LearnerKind, p: dict[str, Any]) -> None:
    if kind is LearnerKind.KNN:
        _require(int(p["k"]) >= 1, "k must be >= 1")
    elif kind is LearnerKind.LOGREG:
        _require(p["learning_rate"] > 0, "learning_rate must be > 0")
        _require(int(p["iterations"]) >= 1, "iterations must be >= 1")
        _require(p["l2"] >= 0, "l2 must be >= 0")
    elif kind is LearnerKind.LINEAR_SVM:
        _require(p["c"] > 0, "c must be > 0")
        _require(int(p["epochs"]) >= 1, "epochs must be >= 1")
        _require(int(p["batch_size"]) >= 1, "batch_size must be >= 1")
        _require(isinstance(p["platt"], bool), "platt must be a bool")
    elif kind in (LearnerKind.DECISION_TREE, LearnerKind.RANDOM_FOREST):
        _require(int(p["max_depth"]) >= 1, "max_depth must be >= 1")
        _require(int(p["min_leaf"]) >= 1, "min_leaf must be >= 1")
        if kind is LearnerKind.RANDOM_FOREST:
            _require(int(p["n_trees"]) >= 1, "n_trees must be >= 1")
            _require(isinstance(p["bootstrap"], bool), "bootstrap must be a bool")
            _require(
                p["feature_subsample"] in ("sqrt", None),
                "feature_subsample must be 'sqrt' or None",
            )
    elif kind is LearnerKind.ADABOOST:
        _require(int(p["rounds"]) >= 1, "rounds must be >= 1")
    elif kind is LearnerKind.GBT:
        _require(int(p["rounds"]) >= 1, "rounds must be >= 1")
        # learning_rate 0 is allowed: the model then predicts the prior log-odds
        _require(p["learning_rate"] >= 0, "learning_rate must be >= 0")
        _require(int(p["max_depth"]) >= 1, "max_depth must be >= 1")
        _require(int(p["min_leaf"]) >= 1, "min_leaf must be >= 1")


@dataclass(frozen=True)
class LearnerSpec:
    """What to train: a kind, hyperparameters merged over per-kind defaults,
    and the seed that pins any internal randomness."""

    kind: LearnerKind
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        kind = LearnerKind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - set(_DEFAULTS[kind])
        if unknown:
            raise ValueError(f"unknown {kind.value} hyperparameters: {sorted(unknown)}")
        merged = {**_DEFAULTS[kind], **dict(self.params)}
        _validate_params(kind, merged)
        object.__setattr__(self, "params", merged)

    def with_seed(self, seed: int) -> "LearnerSpec":
        return replace(self, seed=int(seed))


_FITTERS = {
    LearnerKind.KNN: fit_knn,
    LearnerKind.LOGREG: fit_logreg,
    LearnerKind.LINEAR_SVM: fit_linear_svm,
    LearnerKind.DECISION_TREE: fit_decision_tree,
    LearnerKind.RANDOM_FOREST: fit_random_forest,
    LearnerKind.ADABOOST: fit_adaboost,
    LearnerKind.GBT: fit_gbt,
}

_MODEL_CLASSES: dict[str, type[TrainedLearner]] = {
    "knn": KnnModel,
    "logreg": LogRegModel,
    "linear_svm": LinearSvmModel,
    "decision_tree": DecisionTreeModel,
    "random_forest": RandomForestModel,
    "adaboost": AdaBoostModel,
    "gbt": GbtModel,
}


def fit(spec: LearnerSpec, X: np.ndarray, y: np.ndarray) -> TrainedLearner:
    """Train one learner. Deterministic: same (spec, X, y) gives the same model."""
    return _FITTERS[spec.kind](np.asarray(X, dtype=float), np.asarray(y), dict(spec.params), spec.seed)


def predict_proba(model: TrainedLearner, x: np.ndarray) -> float | np.ndarray:
    return model.predict_proba(x)


def learner_to_dict(model: TrainedLearner) -> dict[str, Any]:
    state = model.state_dict()
    state["kind"] = model.kind
    state["params"] = _jsonable_params(model.params)
    state["seed"] = model.seed
    return state


def _jsonable_params(params: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for key, value in params.items():
        if isinstance(value, (np.integer,)):
            value = int(value)
        elif isinstance(value, (np.floating,)):
            value = float(value)
        out[key] = value
    return out


def learner_from_dict(state: dict[str, Any]) -> TrainedLearner:
    kind = state.get("kind")
    cls = _MODEL_CLASSES.get(kind)
    if cls is None:
        raise ArchiveError(f"unknown learner kind {kind!r}")
    return cls.from_state(state)


BASE_LAYER_KINDS: tuple[LearnerKind, ...] = (
    LearnerKind.KNN,
    LearnerKind.LOGREG,
    LearnerKind.LINEAR_SVM,
    LearnerKind.DECISION_TREE,
    LearnerKind.RANDOM_FOREST,
)


def default_layer_specs(
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> tuple[LearnerSpec, ...]:
    """The five base classifiers of an ensemble layer, in canonical order:
    K-NN, logistic regression, linear SVM, decision tree, random forest."""
    overrides = overrides or {}
    return tuple(
        LearnerSpec(kind, dict(overrides.get(kind.value, {}))) for kind in BASE_LAYER_KINDS
    )


__all__ = [
    "LearnerKind",
    "LearnerSpec",
    "TrainedLearner",
    "fit",
    "predict_proba",
    "learner_to_dict",
    "learner_from_dict",
    "default_layer_specs",
    "BASE_LAYER_KINDS",
    "sigmoid",
    "logreg_loss_and_grad",
    "svm_objective",
    "KnnModel",
    "LogRegModel",
    "LinearSvmModel",
    "DecisionTreeModel",
    "RandomForestModel",
    "AdaBoostModel",
    "GbtModel",
]
