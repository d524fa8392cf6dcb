"""Boosted ensembles: AdaBoost over decision stumps and gradient-boosted trees.

AdaBoost follows the SAMME weight updates with two classes; a round whose
weighted error reaches 0.5 terminates boosting and is not kept. The
gradient-boosted trees minimize logistic loss: each round fits a squared
error regression tree to the residuals (label minus probability), and each
leaf takes a Newton step, sum of residuals over sum of p(1-p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .base import TrainedLearner, sigmoid, validate_training_data

_EPS_ERR = 1e-10
_MIN_GAIN = 1e-12


# decision stumps ------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    """One-split classifier; ``feature`` -1 means a constant prediction."""

    feature: int
    threshold: float
    left: int
    right: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.feature < 0:
            return np.full(X.shape[0], self.right, dtype=int)
        return np.where(X[:, self.feature] <= self.threshold, self.left, self.right)

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature,
            "threshold": float(self.threshold),
            "left": self.left,
            "right": self.right,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Stump":
        return cls(int(d["feature"]), float(d["threshold"]), int(d["left"]), int(d["right"]))


def fit_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> Stump:
    """Weighted-error-minimizing stump; falls back to the heavier constant
    prediction when no split beats it. Ties keep the earliest candidate."""
    total_w = float(w.sum())
    total_tb_w = float(w[y == 1].sum())

    if total_tb_w >= total_w - total_tb_w:
        best_err, best = total_w - total_tb_w, Stump(-1, 0.0, 1, 1)
    else:
        best_err, best = total_tb_w, Stump(-1, 0.0, 0, 0)

    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xv = X[order, j]
        cum_tb_w = np.cumsum(w[order] * y[order])
        cum_w = np.cumsum(w[order])
        pos = np.nonzero(xv[:-1] != xv[1:])[0]
        if pos.size == 0:
            continue
        # polarity A: left P, right TB -> wrong are TB on the left, P on the right
        err_a = 2.0 * cum_tb_w[pos] + total_w - cum_w[pos] - total_tb_w
        err_b = total_w - err_a
        for errs, left, right in ((err_a, 0, 1), (err_b, 1, 0)):
            i = int(np.argmin(errs))
            if errs[i] < best_err - 1e-15:
                best_err = float(errs[i])
                thr = float((xv[pos[i]] + xv[pos[i] + 1]) / 2.0)
                best = Stump(j, thr, left, right)
    return best


class AdaBoostModel(TrainedLearner):
    kind = "adaboost"

    def __init__(
        self,
        stumps: list[Stump],
        alphas: list[float],
        round_errors: list[float],
        n_features: int,
        params: dict[str, Any],
        seed: int,
    ):
        super().__init__(n_features, params, seed)
        self.stumps = stumps
        self.alphas = [float(a) for a in alphas]
        self.round_errors = [float(e) for e in round_errors]

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        score = np.zeros(X.shape[0])
        for alpha, stump in zip(self.alphas, self.stumps):
            score += alpha * (2.0 * stump.predict(X) - 1.0)
        return score

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_score(X))

    def state_dict(self) -> dict[str, Any]:
        return {
            "stumps": [s.to_dict() for s in self.stumps],
            "alphas": self.alphas,
            "n_features": self.n_features,
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "AdaBoostModel":
        stumps = [Stump.from_dict(d) for d in state["stumps"]]
        return cls(stumps, state["alphas"], [], state["n_features"], state["params"], state["seed"])


def fit_adaboost(X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int) -> AdaBoostModel:
    X, y = validate_training_data(X, y)
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    stumps: list[Stump] = []
    alphas: list[float] = []
    errors: list[float] = []
    for _ in range(int(params["rounds"])):
        stump = fit_stump(X, y, w)
        miss = stump.predict(X) != y
        err = float(w[miss].sum())
        if err >= 0.5:
            break
        clamped = max(err, _EPS_ERR)
        alpha = math.log((1.0 - clamped) / clamped)
        stumps.append(stump)
        alphas.append(alpha)
        errors.append(err)
        if err <= _EPS_ERR:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return AdaBoostModel(stumps, alphas, errors, X.shape[1], params, seed)


# gradient-boosted trees -----------------------------------------------------


class RegNode:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value: float):
        self.feature: int = -1
        self.threshold: float = 0.0
        self.left: RegNode | None = None
        self.right: RegNode | None = None
        self.value = float(value)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict[str, Any]:
        if self.is_leaf:
            return {"value": self.value}
        assert self.left is not None and self.right is not None
        return {
            "feature": self.feature,
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RegNode":
        node = cls(d.get("value", 0.0))
        if "feature" in d:
            node.feature = int(d["feature"])
            node.threshold = float(d["threshold"])
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


def best_sse_split(
    X: np.ndarray, r: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """Best squared-error split over all features, or None if nothing helps."""
    n = r.size
    tot_r = float(r.sum())
    tot_r2 = float((r * r).sum())
    parent = tot_r2 - tot_r * tot_r / n

    order = np.argsort(X, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(X, order, axis=0)
    sorted_r = r[order]
    cum_r = np.cumsum(sorted_r, axis=0)[:-1]
    cum_r2 = np.cumsum(sorted_r * sorted_r, axis=0)[:-1]

    boundary = sorted_vals[:-1] != sorted_vals[1:]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    valid = boundary & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    sse = (cum_r2 - cum_r**2 / n_left) + (tot_r2 - cum_r2 - (tot_r - cum_r) ** 2 / n_right)
    sse = np.where(valid, sse, np.inf)
    flat = int(np.argmin(sse))
    row, col = flat // sse.shape[1], flat % sse.shape[1]
    gain = parent - float(sse[row, col])
    if gain <= _MIN_GAIN:
        return None
    threshold = float((sorted_vals[row, col] + sorted_vals[row + 1, col]) / 2.0)
    return col, threshold, gain


def grow_regression_tree(
    X: np.ndarray,
    residual: np.ndarray,
    hessian: np.ndarray,
    max_depth: int,
    min_leaf: int,
) -> RegNode:
    def newton_value(idx: np.ndarray) -> float:
        return float(residual[idx].sum() / max(hessian[idx].sum(), 1e-12))

    def build(idx: np.ndarray, depth: int) -> RegNode:
        node = RegNode(newton_value(idx))
        if depth >= max_depth or idx.size < 2 * min_leaf:
            return node
        found = best_sse_split(X[idx], residual[idx], min_leaf)
        if found is None:
            return node
        feature, threshold, _ = found
        node.feature = feature
        node.threshold = threshold
        mask = X[idx, feature] <= threshold
        node.left = build(idx[mask], depth + 1)
        node.right = build(idx[~mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def regression_tree_values(root: RegNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def walk(node: RegNode, idx: np.ndarray) -> None:
        if node.is_leaf:
            out[idx] = node.value
            return
        assert node.left is not None and node.right is not None
        mask = X[idx, node.feature] <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(root, np.arange(X.shape[0]))
    return out


class GbtModel(TrainedLearner):
    kind = "gbt"

    def __init__(
        self,
        base_score: float,
        trees: list[RegNode],
        learning_rate: float,
        n_features: int,
        params: dict[str, Any],
        seed: int,
    ):
        super().__init__(n_features, params, seed)
        self.base_score = float(base_score)
        self.trees = trees
        self.learning_rate = float(learning_rate)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        score = np.full(X.shape[0], self.base_score)
        if self.learning_rate != 0.0:
            for tree in self.trees:
                score += self.learning_rate * regression_tree_values(tree, X)
        return sigmoid(score)

    def state_dict(self) -> dict[str, Any]:
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "GbtModel":
        trees = [RegNode.from_dict(d) for d in state["trees"]]
        return cls(
            state["base_score"],
            trees,
            state["learning_rate"],
            state["n_features"],
            state["params"],
            state["seed"],
        )


def fit_gbt(X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int) -> GbtModel:
    X, y = validate_training_data(X, y)
    lr = float(params["learning_rate"])
    prior = float(np.clip(y.mean(), 1e-12, 1.0 - 1e-12))
    base = math.log(prior / (1.0 - prior))
    score = np.full(X.shape[0], base)
    trees: list[RegNode] = []
    yf = y.astype(float)
    for _ in range(int(params["rounds"])):
        p = sigmoid(score)
        residual = yf - p
        hessian = p * (1.0 - p)
        tree = grow_regression_tree(
            X, residual, hessian, int(params["max_depth"]), int(params["min_leaf"])
        )
        trees.append(tree)
        if lr != 0.0:
            score = score + lr * regression_tree_values(tree, X)
    return GbtModel(base, trees, lr, X.shape[1], params, seed)
