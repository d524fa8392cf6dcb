"""Linear models: L2-regularized logistic regression and a linear SVM.

Both are trained from scratch. Logistic regression uses full-batch gradient
descent. The SVM minimizes hinge loss plus L2 with a Pegasos-style schedule
over deterministically shuffled mini-batches; because plain subgradient
steps are not monotone, the returned model is the best iterate seen at any
epoch end, so the recorded objective trace never increases.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from ..rng import derive_seed, make_rng
from .base import TrainedLearner, sigmoid, validate_training_data


def logreg_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss plus (l2/2)||w||^2, with its analytic gradient.

    The bias is not regularized.
    """
    z = X @ w + b
    signs = 2.0 * y - 1.0
    loss = float(np.mean(np.logaddexp(0.0, -signs * z)) + 0.5 * l2 * (w @ w))
    resid = (sigmoid(z) - y) / y.size
    grad_w = X.T @ resid + l2 * w
    grad_b = float(resid.sum())
    return loss, grad_w, grad_b


class LogRegModel(TrainedLearner):
    kind = "logreg"

    def __init__(self, w: np.ndarray, b: float, params: dict[str, Any], seed: int):
        super().__init__(w.shape[0], params, seed)
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(X @ self.w + self.b)

    def state_dict(self) -> dict[str, Any]:
        return {"w": [float(v) for v in self.w], "b": self.b}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "LogRegModel":
        return cls(np.asarray(state["w"], dtype=float), state["b"], state["params"], state["seed"])


def fit_logreg(X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int) -> LogRegModel:
    X, y = validate_training_data(X, y)
    lr = float(params["learning_rate"])
    l2 = float(params["l2"])
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(params["iterations"])):
        _, grad_w, grad_b = logreg_loss_and_grad(w, b, X, y, l2)
        w -= lr * grad_w
        b -= lr * grad_b
    return LogRegModel(w, b, params, seed)


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    signs = 2.0 * y - 1.0
    hinge = np.maximum(0.0, 1.0 - signs * (X @ w + b))
    return float(0.5 * lam * (w @ w) + hinge.mean())


class LinearSvmModel(TrainedLearner):
    """Linear SVM; P(TB) squashes the signed margin through a logistic.

    With ``platt`` enabled the squashing is a 1-D logistic fit on the
    training margins instead of the identity-scale sigmoid.
    """

    kind = "linear_svm"

    def __init__(
        self,
        w: np.ndarray,
        b: float,
        calibration: tuple[float, float],
        objective_history: list[float],
        params: dict[str, Any],
        seed: int,
    ):
        super().__init__(w.shape[0], params, seed)
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.calibration = (float(calibration[0]), float(calibration[1]))
        self.objective_history = [float(v) for v in objective_history]

    def _proba(self, X: np.ndarray) -> np.ndarray:
        margin = X @ self.w + self.b
        a, c = self.calibration
        return sigmoid(a * margin + c)

    def state_dict(self) -> dict[str, Any]:
        return {
            "w": [float(v) for v in self.w],
            "b": self.b,
            "calibration": [self.calibration[0], self.calibration[1]],
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "LinearSvmModel":
        return cls(
            np.asarray(state["w"], dtype=float),
            state["b"],
            tuple(state["calibration"]),
            [],
            state["params"],
            state["seed"],
        )


def _platt_scale(margins: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    # 1-D logistic fit p = sigmoid(a*m + c) by gradient descent
    a, c = 1.0, 0.0
    for _ in range(300):
        p = sigmoid(a * margins + c)
        resid = (p - y) / y.size
        a -= 0.5 * float(resid @ margins)
        c -= 0.5 * float(resid.sum())
    return a, c


def fit_linear_svm(
    X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int
) -> LinearSvmModel:
    X, y = validate_training_data(X, y)
    n = X.shape[0]
    lam = 1.0 / (float(params["c"]) * n)
    batch_size = min(int(params["batch_size"]), n)
    signs = 2.0 * y - 1.0
    rng = make_rng(derive_seed(seed, "linear_svm"))

    w = np.zeros(X.shape[1])
    b = 0.0
    best_obj = svm_objective(w, b, X, y, lam)
    best_w, best_b = w.copy(), b
    history = [best_obj]
    t = 0
    for _ in range(int(params["epochs"])):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            t += 1
            eta = 1.0 / (lam * t)
            margins = signs[batch] * (X[batch] @ w + b)
            violators = batch[margins < 1.0]
            w *= 1.0 - eta * lam
            if violators.size:
                w += (eta / batch.size) * (signs[violators] @ X[violators])
                b += (eta / batch.size) * float(signs[violators].sum())
        obj = svm_objective(w, b, X, y, lam)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
        history.append(best_obj)

    calibration = (1.0, 0.0)
    if params.get("platt"):
        calibration = _platt_scale(X @ best_w + best_b, y.astype(float))
    return LinearSvmModel(best_w, best_b, calibration, history, params, seed)
