"""K-nearest-neighbors classifier on normalized features."""

from __future__ import annotations

from typing import Any

import numpy as np

from .base import TrainedLearner, validate_training_data


class KnnModel(TrainedLearner):
    """Memorizes the training set; P(TB) is the TB fraction among the k
    nearest rows by Euclidean distance, distance ties broken by row index."""

    kind = "knn"

    def __init__(self, X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int):
        super().__init__(X.shape[1], params, seed)
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=int)
        self.k = min(int(params["k"]), self.X.shape[0])

    def _proba(self, X: np.ndarray) -> np.ndarray:
        diffs = X[:, None, :] - self.X[None, :, :]
        dist = np.einsum("qij,qij->qi", diffs, diffs)
        # stable sort keeps lower row indices first on exact distance ties
        order = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
        return self.y[order].mean(axis=1)

    def state_dict(self) -> dict[str, Any]:
        return {
            "X": [[float(v) for v in row] for row in self.X],
            "y": [int(v) for v in self.y],
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "KnnModel":
        return cls(
            np.asarray(state["X"], dtype=float),
            np.asarray(state["y"], dtype=int),
            state["params"],
            state["seed"],
        )


def fit_knn(X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int) -> KnnModel:
    X, y = validate_training_data(X, y)
    return KnnModel(X, y, params, seed)
