"""Ensemble layers, leakage-free meta-features, vote tallies and the
disagreement-based confidence score.

A layer's meta-feature for a record is each member's P(TB). During layer
training, the meta matrix rows are produced out-of-fold: fold f's rows come
from members refitted on the other folds, so no learner scores a row it was
trained on.

The confidence score counts, with threshold epsilon, how many members back
each class: tb = |{j : p_j > eps}|, pn = |{j : 1 - p_j > eps}| (one member
can back both when eps < 0.5). CS = |tb - pn| / (tb + pn), and 0 when both
tallies are empty. Unanimity gives 1; an even split gives 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import Label
from .errors import DegenerateFold, ShapeError
from .learners import LearnerSpec, TrainedLearner, fit
from .rng import derive_seed, make_rng


@dataclass(frozen=True)
class VotePanel:
    """Per-member P(TB) for one record, in layer order."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        for p in self.probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"panel probabilities must be in [0, 1], got {p!r}")

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class ConfidencePolicy:
    """epsilon: vote-counting threshold; route_threshold: CS cutoff below
    which a patient is sent to step 2. Values above 1 route everyone."""

    epsilon: float = 0.4
    route_threshold: float = 0.51

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon!r}")
        if self.route_threshold < 0.0:
            raise ValueError(f"route_threshold must be >= 0, got {self.route_threshold!r}")


class EnsembleLayer:
    """An ordered, immutable collection of fitted learners."""

    def __init__(self, learners: Sequence[TrainedLearner], folds: int):
        if len(learners) < 2:
            raise ValueError("an ensemble layer needs at least 2 learners")
        dims = {m.n_features for m in learners}
        if len(dims) != 1:
            raise ShapeError(f"layer members disagree on feature count: {sorted(dims)}")
        self.learners: tuple[TrainedLearner, ...] = tuple(learners)
        self.folds = int(folds)

    @property
    def n_features(self) -> int:
        return self.learners[0].n_features

    def __len__(self) -> int:
        return len(self.learners)

    def panel(self, x: np.ndarray) -> VotePanel:
        return VotePanel(tuple(float(m.predict_proba(x)) for m in self.learners))

    def panel_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.predict_proba(X) for m in self.learners])


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Assign each row a fold id in [0, folds), shuffled per class, dealt
    round-robin so fold sizes differ by at most one within each class."""
    y = np.asarray(y, dtype=int)
    if folds < 2:
        raise ValueError("stacking needs folds >= 2 so every row has held-out scores")
    assignment = np.empty(y.size, dtype=int)
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        if idx.size < folds:
            raise DegenerateFold(
                f"class {cls} has {idx.size} rows, cannot populate {folds} folds"
            )
        rng = make_rng(derive_seed(seed, "stratified_folds", cls))
        shuffled = idx[rng.permutation(idx.size)]
        assignment[shuffled] = np.arange(shuffled.size) % folds
    return assignment


def fit_layer(
    specs: Sequence[LearnerSpec],
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 5,
    seed: int = 0,
) -> tuple[EnsembleLayer, np.ndarray]:
    """Fit every spec on all of (X, y) and build the out-of-fold meta matrix.

    Row i, column j of the meta matrix is the P(TB) that learner j assigns
    to record i after being refitted without record i's fold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    assignment = stratified_folds(y, folds, seed)
    meta = np.empty((X.shape[0], len(specs)))
    for f in range(folds):
        holdout = assignment == f
        rest = ~holdout
        if len(np.unique(y[rest])) < 2:
            raise DegenerateFold(f"training remainder of fold {f} has a single class")
        for j, spec in enumerate(specs):
            fold_model = fit(spec, X[rest], y[rest])
            meta[holdout, j] = fold_model.predict_proba(X[holdout])
    full = [fit(spec, X, y) for spec in specs]
    return EnsembleLayer(full, folds), meta


def meta_features(layer: EnsembleLayer, x: np.ndarray) -> VotePanel:
    return layer.panel(x)


def tally_votes(panel: VotePanel, policy: ConfidencePolicy) -> tuple[int, int]:
    """Count members backing TB and pneumonia. With epsilon below 0.5 a
    member whose two class probabilities both exceed epsilon counts twice."""
    eps = policy.epsilon
    tb = sum(1 for p in panel.probs if p > eps)
    pn = sum(1 for p in panel.probs if 1.0 - p > eps)
    return tb, pn


def confidence_score(panel: VotePanel, policy: ConfidencePolicy) -> float:
    tb, pn = tally_votes(panel, policy)
    if tb + pn == 0:
        return 0.0
    return abs(tb - pn) / (tb + pn)


def vote_label(panel: VotePanel, policy: ConfidencePolicy) -> Label | None:
    """Majority of the epsilon tallies; None (undetermined) on an exact tie.
    Undetermined patients always continue to step 2."""
    tb, pn = tally_votes(panel, policy)
    if tb > pn:
        return Label.TB
    if pn > tb:
        return Label.PNEUMONIA
    return None
