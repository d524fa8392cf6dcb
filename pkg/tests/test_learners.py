import math

import numpy as np
import pytest

from tpis.errors import DegenerateLabels, IncompleteFeatures, ShapeError
from tpis.learners import (
    LearnerKind,
    LearnerSpec,
    LogRegModel,
    default_layer_specs,
    fit,
    learner_from_dict,
    learner_to_dict,
    logreg_loss_and_grad,
    predict_proba,
    svm_objective,
)
from tpis.learners.tree import TreeNode, grow_tree, tree_proba
from tpis.rng import make_rng
from tpis.synthgen import default_spec, sample_cohort

ALL_KINDS = list(LearnerKind)

FAST_PARAMS = {
    LearnerKind.KNN: {},
    LearnerKind.LOGREG: {"iterations": 200},
    LearnerKind.LINEAR_SVM: {"epochs": 25},
    LearnerKind.DECISION_TREE: {},
    LearnerKind.RANDOM_FOREST: {"n_trees": 10},
    LearnerKind.ADABOOST: {"rounds": 15},
    LearnerKind.GBT: {"rounds": 15},
}


def random_problem(n=40, d=6, seed=0):
    rng = make_rng(seed)
    X = rng.random((n, d))
    w = rng.normal(size=d)
    y = ((X @ w + 0.3 * rng.normal(size=n)) > np.median(X @ w)).astype(int)
    if y.min() == y.max():  # pragma: no cover - guard for degenerate draws
        y[0] = 1 - y[0]
    return X, y


# shared contract ---------------------------------------------------------


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_probabilities_stay_in_unit_interval(kind):
    X, y = random_problem(seed=3)
    model = fit(LearnerSpec(kind, FAST_PARAMS[kind], seed=1), X, y)
    p = np.asarray(model.predict_proba(X))
    assert np.all(p >= 0.0) and np.all(p <= 1.0)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fit_is_deterministic(kind):
    X, y = random_problem(seed=4)
    a = fit(LearnerSpec(kind, FAST_PARAMS[kind], seed=9), X, y)
    b = fit(LearnerSpec(kind, FAST_PARAMS[kind], seed=9), X, y)
    assert np.array_equal(np.asarray(a.predict_proba(X)), np.asarray(b.predict_proba(X)))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_state_roundtrip_predicts_identically(kind):
    X, y = random_problem(seed=5)
    model = fit(LearnerSpec(kind, FAST_PARAMS[kind], seed=2), X, y)
    clone = learner_from_dict(learner_to_dict(model))
    Xq = make_rng(8).random((20, X.shape[1]))
    assert np.array_equal(np.asarray(model.predict_proba(Xq)), np.asarray(clone.predict_proba(Xq)))


def test_single_class_labels_rejected():
    X = np.zeros((4, 2))
    with pytest.raises(DegenerateLabels):
        fit(LearnerSpec(LearnerKind.LOGREG), X, np.ones(4, dtype=int))


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        fit(LearnerSpec(LearnerKind.KNN), np.zeros((4, 2)), np.array([0, 1, 0]))


def test_missing_values_rejected():
    X = np.zeros((4, 2))
    X[0, 0] = np.nan
    with pytest.raises(IncompleteFeatures):
        fit(LearnerSpec(LearnerKind.KNN), X, np.array([0, 1, 0, 1]))


def test_predict_dimension_checked():
    X, y = random_problem(seed=6)
    model = fit(LearnerSpec(LearnerKind.KNN), X, y)
    with pytest.raises(ShapeError):
        model.predict_proba(np.zeros(X.shape[1] + 1))


def test_hyperparameters_validated():
    with pytest.raises(ValueError):
        LearnerSpec(LearnerKind.KNN, {"k": 0})
    with pytest.raises(ValueError):
        LearnerSpec(LearnerKind.RANDOM_FOREST, {"n_trees": 0})
    with pytest.raises(ValueError):
        LearnerSpec(LearnerKind.LOGREG, {"learning_rate": 0.0})
    with pytest.raises(ValueError):
        LearnerSpec(LearnerKind.KNN, {"neighbors": 3})


def test_default_layer_order():
    kinds = [s.kind for s in default_layer_specs()]
    assert kinds == [
        LearnerKind.KNN,
        LearnerKind.LOGREG,
        LearnerKind.LINEAR_SVM,
        LearnerKind.DECISION_TREE,
        LearnerKind.RANDOM_FOREST,
    ]


# K-NN ---------------------------------------------------------------------


def test_knn_memorizes_training_set_at_k1():
    X, y = random_problem(n=30, seed=7)
    model = fit(LearnerSpec(LearnerKind.KNN, {"k": 1}), X, y)
    assert np.array_equal(np.asarray(model.predict(X)), y)


def test_knn_vote_fraction():
    X = np.array([[0.0], [0.1], [0.2], [10.0]])
    y = np.array([1, 1, 0, 0])
    model = fit(LearnerSpec(LearnerKind.KNN, {"k": 3}), X, y)
    assert model.predict_proba(np.array([0.05])) == pytest.approx(2.0 / 3.0)


def test_knn_distance_ties_break_by_row_index():
    X = np.array([[0.0], [2.0], [2.0]])
    y = np.array([0, 1, 0])
    model = fit(LearnerSpec(LearnerKind.KNN, {"k": 1}), X, y)
    assert model.predict_proba(np.array([2.0])) == 1.0


# logistic regression --------------------------------------------------------


def test_logreg_zero_model_is_half():
    model = LogRegModel(np.zeros(3), 0.0, {}, 0)
    assert model.predict_proba(np.array([4.0, -2.0, 1.0])) == 0.5


def test_logreg_orders_separable_points():
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    model = fit(LearnerSpec(LearnerKind.LOGREG), X, y)
    p0 = model.predict_proba(np.array([0.0]))
    p1 = model.predict_proba(np.array([1.0]))
    assert p1 > 0.5 > p0


def test_logreg_gradient_matches_finite_differences():
    rng = make_rng(12)
    for _ in range(10):
        n, d = int(rng.integers(3, 12)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        lam = float(rng.random() * 0.1)
        _, gw, gb = logreg_loss_and_grad(w, b, X, y, lam)
        h = 1e-6
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            hi, _, _ = logreg_loss_and_grad(w + e, b, X, y, lam)
            lo, _, _ = logreg_loss_and_grad(w - e, b, X, y, lam)
            fd = (hi - lo) / (2 * h)
            assert abs(fd - gw[j]) <= 1e-5 * max(1.0, abs(fd))
        hi, _, _ = logreg_loss_and_grad(w, b + h, X, y, lam)
        lo, _, _ = logreg_loss_and_grad(w, b - h, X, y, lam)
        assert abs((hi - lo) / (2 * h) - gb) <= 1e-5


# linear SVM ------------------------------------------------------------------


def test_svm_objective_trace_never_increases():
    X, y = random_problem(n=60, d=8, seed=13)
    model = fit(LearnerSpec(LearnerKind.LINEAR_SVM, {"epochs": 50}), X, y)
    history = model.objective_history
    assert len(history) == 51
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    lam = 1.0 / (1.0 * y.size)
    assert svm_objective(model.w, model.b, X, y, lam) == pytest.approx(history[-1])


def test_svm_learns_separable_data():
    X = np.vstack([np.full((10, 2), 0.0), np.full((10, 2), 1.0)])
    y = np.array([0] * 10 + [1] * 10)
    model = fit(LearnerSpec(LearnerKind.LINEAR_SVM, {"epochs": 80}), X, y)
    assert model.predict_proba(np.array([1.0, 1.0])) > 0.5
    assert model.predict_proba(np.array([0.0, 0.0])) < 0.5


def test_svm_platt_flag():
    X, y = random_problem(n=50, seed=14)
    model = fit(LearnerSpec(LearnerKind.LINEAR_SVM, {"epochs": 25, "platt": True}), X, y)
    assert model.calibration != (1.0, 0.0)
    p = np.asarray(model.predict_proba(X))
    assert np.all((p >= 0) & (p <= 1))


# decision tree ----------------------------------------------------------------


def test_tree_leaf_probability_is_smoothed_frequency():
    node = TreeNode(n_tb=4, n=5)
    assert node.leaf_proba == pytest.approx(5.0 / 7.0)


def test_tree_splits_pure_step():
    X = np.array([[0.0], [0.0], [0.0], [0.0], [0.0], [1.0], [1.0]])
    y = np.array([1, 1, 1, 1, 0, 0, 0])
    model = fit(LearnerSpec(LearnerKind.DECISION_TREE, {"max_depth": 2}), X, y)
    assert model.predict_proba(np.array([0.0])) == pytest.approx(5.0 / 7.0)
    assert model.predict_proba(np.array([1.0])) == pytest.approx(1.0 / 4.0)


def _gini(n_tb, n):
    if n == 0:
        return 0.0
    p = n_tb / n
    return 1 - p * p - (1 - p) * (1 - p)


def _check_strict_decrease(node):
    if node.is_leaf:
        return
    parent = _gini(node.n_tb, node.n)
    left, right = node.left, node.right
    weighted = (left.n * _gini(left.n_tb, left.n) + right.n * _gini(right.n_tb, right.n)) / node.n
    assert weighted < parent
    _check_strict_decrease(left)
    _check_strict_decrease(right)


def test_tree_every_split_strictly_decreases_gini():
    X, y = random_problem(n=80, d=5, seed=15)
    root = grow_tree(X, y, max_depth=6, min_leaf=2)
    assert not root.is_leaf
    _check_strict_decrease(root)


def test_tree_training_predictions_equal_leaf_lookup():
    X, y = random_problem(n=50, d=4, seed=16)
    root = grow_tree(X, y, max_depth=4, min_leaf=2)

    def walk(x, node):
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.leaf_proba

    expected = np.array([walk(x, root) for x in X])
    assert np.array_equal(tree_proba(root, X), expected)


def test_min_leaf_respected():
    X, y = random_problem(n=60, d=4, seed=17)
    root = grow_tree(X, y, max_depth=8, min_leaf=5)

    def leaves(node):
        if node.is_leaf:
            yield node
        else:
            yield from leaves(node.left)
            yield from leaves(node.right)

    assert all(leaf.n >= 5 for leaf in leaves(root))


# random forest -----------------------------------------------------------------


def test_forest_of_one_plain_tree_equals_decision_tree():
    X, y = random_problem(n=60, d=5, seed=18)
    params = {"max_depth": 4, "min_leaf": 2}
    tree = fit(LearnerSpec(LearnerKind.DECISION_TREE, params, seed=5), X, y)
    forest = fit(
        LearnerSpec(
            LearnerKind.RANDOM_FOREST,
            {**params, "n_trees": 1, "bootstrap": False, "feature_subsample": None},
            seed=5,
        ),
        X,
        y,
    )
    Xq = make_rng(3).random((25, 5))
    assert np.array_equal(np.asarray(tree.predict_proba(Xq)), np.asarray(forest.predict_proba(Xq)))


def test_forest_regression_value_on_seeded_cohort():
    # fixed-seed regression baseline established at first build
    records = sample_cohort(default_spec(), 200, seed=42)
    X = np.array([np.concatenate([r.step1.to_vector(), r.step2.to_vector()]) for r in records])
    y = np.array([1 if r.label.value == "TB" else 0 for r in records])
    model = fit(LearnerSpec(LearnerKind.RANDOM_FOREST, {"n_trees": 50}, seed=0), X[:120], y[:120])
    acc = float((np.asarray(model.predict(X[120:])) == y[120:]).mean())
    assert acc == pytest.approx(0.9, abs=1e-9)


# AdaBoost -----------------------------------------------------------------------


def test_adaboost_round_errors_below_half_and_alphas_finite():
    X, y = random_problem(n=70, d=6, seed=19)
    model = fit(LearnerSpec(LearnerKind.ADABOOST, {"rounds": 25}), X, y)
    assert len(model.stumps) >= 1
    assert all(e < 0.5 for e in model.round_errors)
    assert all(math.isfinite(a) for a in model.alphas)


def test_adaboost_stops_after_perfect_stump():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(LearnerSpec(LearnerKind.ADABOOST, {"rounds": 50}), X, y)
    assert len(model.stumps) == 1
    assert np.array_equal(np.asarray(model.predict(X)), y)


# gradient-boosted trees ------------------------------------------------------------


def test_gbt_zero_learning_rate_predicts_prior():
    X, y = random_problem(n=40, d=4, seed=20)
    model = fit(LearnerSpec(LearnerKind.GBT, {"rounds": 5, "learning_rate": 0.0}), X, y)
    p = np.asarray(model.predict_proba(X))
    assert np.allclose(p, y.mean())


def test_gbt_fits_training_data_better_than_prior():
    X, y = random_problem(n=60, d=5, seed=21)
    model = fit(LearnerSpec(LearnerKind.GBT, {"rounds": 30}), X, y)
    assert float((np.asarray(model.predict(X)) == y).mean()) >= 0.9
