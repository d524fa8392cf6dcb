"""Evaluation: confusion counts, accuracy/precision/recall/F-score, ROC/AUC,
repeated balanced-split evaluation with 95% confidence intervals, and the
multi-model comparison harness.

The comparison harness evaluates each recipe on R independent balanced
splits. Ensemble rows score a record by the mean of the panel probabilities;
their hard label comes from the vote rule, with an undetermined vote falling
back to the 0.5 score cut so every row yields a label for counting.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .domain import ConfusionMatrix, FeatureSetId, Label, PatientRecord, STEP1_FIELDS
from .errors import DegenerateLabels, EmptyEvaluation, ShapeError
from .learners import LearnerKind, LearnerSpec
from .pipeline import TpisConfig, TpisModel, _fit_tpis_artifacts
from .preprocess import ScalerState, SplitSpec, apply_scaler, balanced_split, fit_scaler
from .rng import derive_seed


def confusion(y_true: Sequence[Label], y_pred: Sequence[Label]) -> ConfusionMatrix:
    """Count TP/FP/FN/TN with TB as the positive class."""
    if len(y_true) != len(y_pred):
        raise ShapeError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    if not y_true:
        raise EmptyEvaluation("no records to evaluate")
    tp = fp = fn = tn = 0
    for truth, pred in zip(y_true, y_pred):
        if truth is Label.TB:
            if pred is Label.TB:
                tp += 1
            else:
                fn += 1
        else:
            if pred is Label.TB:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class BasicMetrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    degenerate: frozenset[str]


def basic_metrics(cm: ConfusionMatrix) -> BasicMetrics:
    """Accuracy, precision, recall and F-score from a confusion matrix.

    A ratio with a zero denominator is reported as 0 and named in the
    ``degenerate`` set instead of raising.
    """
    if cm.n == 0:
        raise EmptyEvaluation("confusion matrix is empty")
    degenerate = set()
    accuracy = (cm.tp + cm.tn) / cm.n
    if cm.tp + cm.fp == 0:
        precision = 0.0
        degenerate.add("precision")
    else:
        precision = cm.tp / (cm.tp + cm.fp)
    if cm.tp + cm.fn == 0:
        recall = 0.0
        degenerate.add("recall")
    else:
        recall = cm.tp / (cm.tp + cm.fn)
    if precision + recall == 0:
        f_score = 0.0
        degenerate.add("f_score")
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return BasicMetrics(accuracy, precision, recall, f_score, frozenset(degenerate))


@dataclass(frozen=True)
class RocCurve:
    """(false-positive rate, true-positive rate) points from sweeping the
    score threshold downward; starts at (0, 0) and ends at (1, 1)."""

    points: tuple[tuple[float, float], ...]


def roc_auc(scores: Sequence[float], y_true: Sequence[Label | int]) -> tuple[RocCurve, float]:
    """ROC curve over descending unique score thresholds and its trapezoidal
    area. Tied scores collapse into a single curve point, which makes the
    area equal the Mann-Whitney pair statistic with ties counted half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray([1 if t is Label.TB else (0 if t is Label.PNEUMONIA else int(t)) for t in y_true])
    if s.shape[0] != y.shape[0]:
        raise ShapeError("scores and labels differ in length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC needs both classes in the truth labels")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    # keep only the last index of each tied-score group
    last_of_group = np.nonzero(np.diff(s_sorted, append=np.nan))[0]
    tpr = np.concatenate([[0.0], tp[last_of_group] / n_pos])
    fpr = np.concatenate([[0.0], fp[last_of_group] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    curve = RocCurve(tuple((float(x), float(t)) for x, t in zip(fpr, tpr)))
    return curve, auc


def confidence_interval(values: Sequence[float]) -> tuple[float, float]:
    """Mean and 1.96 * sd / sqrt(R) half-width; a single value has width 0."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(1.96 * arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass(frozen=True)
class MetricStat:
    mean: float
    half_width: float


@dataclass(frozen=True)
class MetricReport:
    name: str
    runs: int
    accuracy: MetricStat
    auc: MetricStat
    precision: MetricStat
    recall: MetricStat
    f_score: MetricStat

    _FIELDS = ("accuracy", "auc", "precision", "recall", "f_score")

    def row(self) -> list[str]:
        cells = [self.name]
        for name in self._FIELDS:
            stat: MetricStat = getattr(self, name)
            cells.append(f"{100 * stat.mean:.2f}±{100 * stat.half_width:.2f}")
        return cells


# model recipes and the per-run engine ---------------------------------------


@dataclass(frozen=True)
class ModelRecipe:
    """One comparison row: either a single learner trained on the feature
    set under test, or one of the pipeline's ensemble read-outs."""

    name: str
    kind: str  # "single" | "tpis_layer1" | "tpis_layer2" | "tpis_step2"
    spec: LearnerSpec | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("single", "tpis_layer1", "tpis_layer2", "tpis_step2"):
            raise ValueError(f"unknown recipe kind {self.kind!r}")
        if self.kind == "single" and self.spec is None:
            raise ValueError("single-learner recipes need a spec")


def single_recipes(
    kinds: Sequence[LearnerKind] | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> list[ModelRecipe]:
    names = {
        LearnerKind.KNN: "K-NN",
        LearnerKind.LOGREG: "LR",
        LearnerKind.LINEAR_SVM: "SVM",
        LearnerKind.DECISION_TREE: "DT",
        LearnerKind.RANDOM_FOREST: "RF",
        LearnerKind.ADABOOST: "AdaBoost",
        LearnerKind.GBT: "GBT",
    }
    kinds = kinds or (
        LearnerKind.DECISION_TREE,
        LearnerKind.LOGREG,
        LearnerKind.LINEAR_SVM,
        LearnerKind.RANDOM_FOREST,
        LearnerKind.ADABOOST,
        LearnerKind.GBT,
    )
    overrides = overrides or {}
    return [
        ModelRecipe(names[k], "single", LearnerSpec(k, dict(overrides.get(k.value, {}))))
        for k in kinds
    ]


def table_recipes(
    fs: FeatureSetId, overrides: Mapping[str, Mapping[str, Any]] | None = None
) -> list[ModelRecipe]:
    """The comparison row set for a feature set: six singles everywhere,
    plus the step-1 layers on FS1 and the full pipeline on FS4."""
    rows = single_recipes(overrides=overrides)
    if fs is FeatureSetId.FS1:
        rows.append(ModelRecipe("TPIS step-1 layer 1", "tpis_layer1"))
        rows.append(ModelRecipe("TPIS step-1 layer 2", "tpis_layer2"))
    elif fs is FeatureSetId.FS4:
        rows.append(ModelRecipe("TPIS step 2", "tpis_step2"))
    return rows


def _records_to_xy(records: Sequence[PatientRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X1 = np.array([r.step1.to_vector() for r in records])
    nan_row = np.full(10, np.nan)
    X2 = np.array([r.step2.to_vector() if r.step2 is not None else nan_row for r in records])
    y = np.array([1 if r.label is Label.TB else 0 for r in records])
    return X1, X2, y


@dataclass
class _RunContext:
    model: TpisModel | None
    policy_epsilon: float
    meta2_train: np.ndarray | None
    meta2_test: np.ndarray | None
    meta1_test: np.ndarray | None
    X1s_train: np.ndarray
    X1s_test: np.ndarray
    X2s_train: np.ndarray
    X2s_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray


def _needs_pipeline(fs: FeatureSetId, recipes: Sequence[ModelRecipe]) -> bool:
    return fs in (FeatureSetId.FS3, FeatureSetId.FS4) or any(
        r.kind != "single" for r in recipes
    )


def _make_run_context(
    train: Sequence[PatientRecord],
    test: Sequence[PatientRecord],
    config: TpisConfig,
    with_pipeline: bool,
) -> _RunContext:
    X1_tr, X2_tr, y_tr = _records_to_xy(train)
    X1_te, X2_te, y_te = _records_to_xy(test)
    if with_pipeline:
        model, meta2_train = _fit_tpis_artifacts(train, config)
        X1s_te = model.scale_step1(X1_te)
        meta1_te = model.layer1.panel_matrix(X1s_te)
        meta2_te = model.layer2.panel_matrix(meta1_te)
        return _RunContext(
            model=model,
            policy_epsilon=config.policy.epsilon,
            meta2_train=meta2_train,
            meta2_test=meta2_te,
            meta1_test=meta1_te,
            X1s_train=model.scale_step1(X1_tr),
            X1s_test=X1s_te,
            X2s_train=model.scale_step2(X2_tr),
            X2s_test=model.scale_step2(X2_te),
            y_train=y_tr,
            y_test=y_te,
        )
    n1 = len(STEP1_FIELDS)
    scaler = fit_scaler(np.hstack([X1_tr, X2_tr]))
    scaler1 = ScalerState(scaler.mins[:n1], scaler.maxs[:n1])
    scaler2 = ScalerState(scaler.mins[n1:], scaler.maxs[n1:])
    return _RunContext(
        model=None,
        policy_epsilon=config.policy.epsilon,
        meta2_train=None,
        meta2_test=None,
        meta1_test=None,
        X1s_train=apply_scaler(scaler1, X1_tr),
        X1s_test=apply_scaler(scaler1, X1_te),
        X2s_train=apply_scaler(scaler2, X2_tr),
        X2s_test=apply_scaler(scaler2, X2_te),
        y_train=y_tr,
        y_test=y_te,
    )


def _feature_matrices(ctx: _RunContext, fs: FeatureSetId) -> tuple[np.ndarray, np.ndarray]:
    if fs is FeatureSetId.FS1:
        return ctx.X1s_train, ctx.X1s_test
    if fs is FeatureSetId.FS2:
        return ctx.X2s_train, ctx.X2s_test
    if fs is FeatureSetId.FS3:
        return ctx.meta2_train, ctx.meta2_test
    if fs is FeatureSetId.FS4:
        return (
            np.hstack([ctx.X2s_train, ctx.meta2_train]),
            np.hstack([ctx.X2s_test, ctx.meta2_test]),
        )
    return (
        np.hstack([ctx.X1s_train, ctx.X2s_train]),
        np.hstack([ctx.X1s_test, ctx.X2s_test]),
    )


def _panel_readout(panel_matrix: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Scores and hard labels for an ensemble panel: mean probability plus
    the epsilon-tally vote, score-cut fallback on undetermined rows."""
    scores = panel_matrix.mean(axis=1)
    tb = (panel_matrix > epsilon).sum(axis=1)
    pn = ((1.0 - panel_matrix) > epsilon).sum(axis=1)
    labels = np.where(tb > pn, 1, np.where(pn > tb, 0, (scores >= 0.5).astype(int)))
    return scores, labels


def _evaluate_recipe(
    recipe: ModelRecipe, fs: FeatureSetId, ctx: _RunContext, run_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    from .learners import fit as fit_learner

    if recipe.kind == "single":
        assert recipe.spec is not None
        X_tr, X_te = _feature_matrices(ctx, fs)
        spec = recipe.spec.with_seed(derive_seed(run_seed, "single", recipe.name))
        model = fit_learner(spec, X_tr, ctx.y_train)
        scores = np.asarray(model.predict_proba(X_te))
        return scores, (scores >= 0.5).astype(int)
    assert ctx.model is not None
    eps = ctx.policy_epsilon
    if recipe.kind == "tpis_layer1":
        return _panel_readout(ctx.model.layer1.panel_matrix(ctx.X1s_test), eps)
    if recipe.kind == "tpis_layer2":
        return _panel_readout(ctx.model.layer2.panel_matrix(ctx.meta1_test), eps)
    # full pipeline: step-2 ensemble on labs + CXR + meta-features
    fs4 = np.hstack([ctx.X2s_test, ctx.meta2_test])
    panel = ctx.model.step2_layer.panel_matrix(fs4)
    labels = ((panel >= 0.5).sum(axis=1) >= panel.shape[1] / 2.0).astype(int)
    return panel.mean(axis=1), labels


def _int_labels(values: np.ndarray) -> list[Label]:
    return [Label.TB if v == 1 else Label.PNEUMONIA for v in values]


def evaluate_recipes(
    records: Sequence[PatientRecord],
    fs: FeatureSetId,
    recipes: Sequence[ModelRecipe],
    runs: int,
    train_per_class: int,
    seed: int = 0,
    config: TpisConfig | None = None,
) -> list[MetricReport]:
    """Run every recipe over ``runs`` balanced splits and aggregate."""
    if not recipes:
        raise ValueError("no recipes to evaluate")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    base_config = config or TpisConfig()
    with_pipeline = _needs_pipeline(fs, recipes)
    per_recipe: dict[str, dict[str, list[float]]] = {
        r.name: {m: [] for m in MetricReport._FIELDS} for r in recipes
    }
    for r in range(runs):
        run_seed = derive_seed(seed, "run", r)
        train, test = balanced_split(records, SplitSpec(train_per_class, run_seed))
        ctx = _make_run_context(train, test, _replace_seed(base_config, run_seed), with_pipeline)
        truth = _int_labels(ctx.y_test)
        for recipe in recipes:
            scores, labels = _evaluate_recipe(recipe, fs, ctx, run_seed)
            cm = confusion(truth, _int_labels(labels))
            bm = basic_metrics(cm)
            _, auc = roc_auc(scores, truth)
            acc = per_recipe[recipe.name]
            acc["accuracy"].append(bm.accuracy)
            acc["auc"].append(auc)
            acc["precision"].append(bm.precision)
            acc["recall"].append(bm.recall)
            acc["f_score"].append(bm.f_score)
    reports = []
    for recipe in recipes:
        stats = {
            m: MetricStat(*confidence_interval(per_recipe[recipe.name][m]))
            for m in MetricReport._FIELDS
        }
        reports.append(MetricReport(name=recipe.name, runs=runs, **stats))
    return reports


def _replace_seed(config: TpisConfig, seed: int) -> TpisConfig:
    return TpisConfig(specs=config.specs, policy=config.policy, folds=config.folds, seed=seed)


def repeated_eval(
    recipe: ModelRecipe,
    records: Sequence[PatientRecord],
    fs: FeatureSetId,
    runs: int = 30,
    train_per_class: int = 60,
    seed: int = 0,
    config: TpisConfig | None = None,
) -> MetricReport:
    return evaluate_recipes(records, fs, [recipe], runs, train_per_class, seed, config)[0]


@dataclass(frozen=True)
class ComparisonTable:
    feature_set: FeatureSetId
    runs: int
    reports: tuple[MetricReport, ...]

    HEADER = ("Model", "Accuracy", "AUC", "Precision", "Recall", "F-Score")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.HEADER) + "\n")
        for report in self.reports:
            buf.write(",".join(report.row()) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        rows = [list(self.HEADER)] + [r.row() for r in self.reports]
        widths = [max(len(row[i]) for row in rows) for i in range(len(self.HEADER))]
        lines = []
        for row in rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        return "\n".join(lines)


def compare_models(
    fs: FeatureSetId,
    recipes: Sequence[ModelRecipe],
    records: Sequence[PatientRecord],
    runs: int = 30,
    train_per_class: int = 60,
    seed: int = 0,
    config: TpisConfig | None = None,
) -> ComparisonTable:
    reports = evaluate_recipes(records, fs, recipes, runs, train_per_class, seed, config)
    return ComparisonTable(feature_set=fs, runs=runs, reports=tuple(reports))


def roc_points(
    recipe: ModelRecipe,
    records: Sequence[PatientRecord],
    fs: FeatureSetId,
    train_per_class: int = 60,
    seed: int = 0,
    config: TpisConfig | None = None,
) -> tuple[RocCurve, float]:
    """ROC curve of one recipe on the first split, for external plotting."""
    run_seed = derive_seed(seed, "run", 0)
    train, test = balanced_split(records, SplitSpec(train_per_class, run_seed))
    base_config = config or TpisConfig()
    ctx = _make_run_context(
        train, test, _replace_seed(base_config, run_seed), _needs_pipeline(fs, [recipe])
    )
    scores, _ = _evaluate_recipe(recipe, fs, ctx, run_seed)
    return roc_auc(scores, _int_labels(ctx.y_test))


def roc_points_csv(curve: RocCurve) -> str:
    lines = ["fpr,tpr"]
    lines.extend(f"{fpr!r},{tpr!r}" for fpr, tpr in curve.points)
    return "\n".join(lines) + "\n"
