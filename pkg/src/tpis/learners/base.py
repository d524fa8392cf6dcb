"""Shared learner plumbing: the fit/predict contract and input validation."""

from __future__ import annotations

from typing import Any

import numpy as np

from ..errors import DegenerateLabels, IncompleteFeatures, ShapeError


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def validate_training_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got ndim={X.ndim}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(f"y length {y.shape} does not match X rows {X.shape[0]}")
    if np.isnan(X).any():
        raise IncompleteFeatures("training matrix contains missing values")
    y = y.astype(int)
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("y must contain only 0 (pneumonia) and 1 (TB)")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")
    return X, y


class TrainedLearner:
    """Immutable fitted model: stores its kind, parameters and feature count.

    ``predict_proba`` accepts a single feature vector or a matrix and returns
    the probability of TB for each row.
    """

    kind: str = ""

    def __init__(self, n_features: int, params: dict[str, Any], seed: int):
        self.n_features = int(n_features)
        self.params = dict(params)
        self.seed = int(seed)

    def _proba(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba(self, X: np.ndarray) -> float | np.ndarray:
        arr = np.asarray(X, dtype=float)
        vector = arr.ndim == 1
        mat = np.atleast_2d(arr)
        if mat.ndim != 2 or mat.shape[1] != self.n_features:
            raise ShapeError(
                f"{self.kind} was fitted on {self.n_features} features, got shape {arr.shape}"
            )
        if np.isnan(mat).any():
            raise IncompleteFeatures("prediction input contains missing values")
        p = np.asarray(self._proba(mat), dtype=float)
        return float(p[0]) if vector else p

    def predict(self, X: np.ndarray) -> int | np.ndarray:
        """Hard label: TB (1) iff the probability of TB is at least 0.5."""
        p = self.predict_proba(X)
        if isinstance(p, float):
            return int(p >= 0.5)
        return (p >= 0.5).astype(int)

    def state_dict(self) -> dict[str, Any]:  # pragma: no cover - abstract
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "TrainedLearner":  # pragma: no cover
        raise NotImplementedError
