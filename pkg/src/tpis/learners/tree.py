"""CART decision trees with Gini impurity, and bootstrap-aggregated forests.

Split candidates are the midpoints of consecutive distinct sorted values.
A split is accepted only if it strictly decreases weighted Gini impurity
and leaves at least ``min_leaf`` rows on each side. Leaf probabilities are
Laplace-smoothed TB frequencies, (tb + 1) / (n + 2).
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from ..rng import derive_seed, make_rng
from .base import TrainedLearner, validate_training_data

_MIN_GAIN = 1e-12


class TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "n_tb", "n")

    def __init__(self, n_tb: int, n: int):
        self.feature: int = -1
        self.threshold: float = 0.0
        self.left: TreeNode | None = None
        self.right: TreeNode | None = None
        self.n_tb = int(n_tb)
        self.n = int(n)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def leaf_proba(self) -> float:
        return (self.n_tb + 1.0) / (self.n + 2.0)

    def to_dict(self) -> dict[str, Any]:
        if self.is_leaf:
            return {"n_tb": self.n_tb, "n": self.n}
        assert self.left is not None and self.right is not None
        return {
            "feature": self.feature,
            "threshold": float(self.threshold),
            "n_tb": self.n_tb,
            "n": self.n,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TreeNode":
        node = cls(d["n_tb"], d["n"])
        if "feature" in d:
            node.feature = int(d["feature"])
            node.threshold = float(d["threshold"])
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


def _gini_from_counts(tb: float, n: float) -> float:
    if n == 0:
        return 0.0
    p = tb / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def best_gini_split(
    X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity_decrease) over the given features.

    Returns None when no candidate strictly decreases weighted impurity.
    Ties resolve to the earliest boundary of the earliest listed feature.
    """
    n = y.size
    tb_total = int(y.sum())
    parent = _gini_from_counts(tb_total, n)
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(cols, order, axis=0)
    sorted_y = y[order]
    cum_tb = np.cumsum(sorted_y, axis=0)

    boundary = sorted_vals[:-1] != sorted_vals[1:]
    if not boundary.any():
        return None
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    valid = boundary & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None

    tb_left = cum_tb[:-1].astype(float)
    tb_right = tb_total - tb_left
    p_left = tb_left / n_left
    p_right = tb_right / n_right
    gini_left = 1.0 - p_left**2 - (1.0 - p_left) ** 2
    gini_right = 1.0 - p_right**2 - (1.0 - p_right) ** 2
    weighted = (n_left * gini_left + n_right * gini_right) / n
    weighted = np.where(valid, weighted, np.inf)

    flat = int(np.argmin(weighted))
    row, col = flat // weighted.shape[1], flat % weighted.shape[1]
    gain = parent - float(weighted[row, col])
    if gain <= _MIN_GAIN:
        return None
    threshold = float((sorted_vals[row, col] + sorted_vals[row + 1, col]) / 2.0)
    return int(features[col]), threshold, gain


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_leaf: int,
    n_candidate_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Recursive CART build. ``n_candidate_features`` enables per-split
    feature subsampling for forests (requires ``rng``)."""
    d = X.shape[1]
    all_features = np.arange(d)

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        y_node = y[idx]
        node = TreeNode(int(y_node.sum()), idx.size)
        if depth >= max_depth or idx.size < 2 * min_leaf or node.n_tb in (0, node.n):
            return node
        if n_candidate_features is not None and n_candidate_features < d:
            assert rng is not None
            features = np.sort(rng.choice(d, size=n_candidate_features, replace=False))
        else:
            features = all_features
        found = best_gini_split(X[idx], y_node, features, min_leaf)
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


def tree_proba(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def walk(node: TreeNode, idx: np.ndarray) -> None:
        if node.is_leaf:
            out[idx] = node.leaf_proba
            return
        assert node.left is not None and node.right is not None
        mask = X[idx, node.feature] <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(root, np.arange(X.shape[0]))
    return out


class DecisionTreeModel(TrainedLearner):
    kind = "decision_tree"

    def __init__(self, root: TreeNode, n_features: int, params: dict[str, Any], seed: int):
        super().__init__(n_features, params, seed)
        self.root = root

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return tree_proba(self.root, X)

    def state_dict(self) -> dict[str, Any]:
        return {"root": self.root.to_dict(), "n_features": self.n_features}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "DecisionTreeModel":
        return cls(TreeNode.from_dict(state["root"]), state["n_features"], state["params"], state["seed"])


def fit_decision_tree(
    X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int
) -> DecisionTreeModel:
    X, y = validate_training_data(X, y)
    root = grow_tree(X, y, int(params["max_depth"]), int(params["min_leaf"]))
    return DecisionTreeModel(root, X.shape[1], params, seed)


class RandomForestModel(TrainedLearner):
    """Mean of per-tree probabilities over bootstrap-sampled CART trees."""

    kind = "random_forest"

    def __init__(self, roots: list[TreeNode], n_features: int, params: dict[str, Any], seed: int):
        super().__init__(n_features, params, seed)
        self.roots = roots

    def _proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0])
        for root in self.roots:
            acc += tree_proba(root, X)
        return acc / len(self.roots)

    def state_dict(self) -> dict[str, Any]:
        return {"roots": [r.to_dict() for r in self.roots], "n_features": self.n_features}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "RandomForestModel":
        roots = [TreeNode.from_dict(d) for d in state["roots"]]
        return cls(roots, state["n_features"], state["params"], state["seed"])


def fit_random_forest(
    X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int
) -> RandomForestModel:
    X, y = validate_training_data(X, y)
    n, d = X.shape
    n_candidates: int | None = None
    if params["feature_subsample"] == "sqrt":
        n_candidates = max(1, int(math.floor(math.sqrt(d))))
    roots = []
    for i in range(int(params["n_trees"])):
        rng = make_rng(derive_seed(seed, "tree", i))
        if params["bootstrap"]:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
            if len(np.unique(yb)) < 2:
                # degenerate bootstrap draw: keep the original rows instead
                Xb, yb = X, y
        else:
            Xb, yb = X, y
        roots.append(
            grow_tree(
                Xb,
                yb,
                int(params["max_depth"]),
                int(params["min_leaf"]),
                n_candidate_features=n_candidates,
                rng=rng,
            )
        )
    return RandomForestModel(roots, d, params, seed)
