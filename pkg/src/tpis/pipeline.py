"""The assembled two-step model: a stacked ensemble for early diagnosis with
confidence scoring, routing of low-confidence patients, and a final ensemble
over laboratory values, chest-X-ray keywords and meta-features.

Training layout: layer 1 fits on the 18 low-cost features; layer 2 fits on
layer 1's out-of-fold meta-features; the step-2 layer fits on the 10 lab/CXR
features concatenated with layer 2's out-of-fold meta-features. Inference
takes raw-unit complete features and applies the model's stored min-max
scaler, so callers never normalize by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from .domain import (
    Label,
    PatientRecord,
    STEP1_FIELDS,
    STEP2_FIELDS,
    StepOneFeatures,
    StepTwoFeatures,
)
from .errors import (
    DegenerateLabels,
    EmptyDataset,
    IncompleteFeatures,
    InvalidTable,
    ShapeError,
    StepTwoUnavailable,
)
from .learners import LearnerSpec, default_layer_specs
from .preprocess import ScalerState, apply_scaler, fit_scaler
from .rng import derive_seed
from .stacking import (
    ConfidencePolicy,
    EnsembleLayer,
    VotePanel,
    confidence_score,
    fit_layer,
    vote_label,
)


@dataclass(frozen=True)
class TpisConfig:
    """Training configuration: the base specs used by all three layers,
    the confidence policy, the fold count and the master seed.

    folds defaults to 10: with ~120-row training sets, 10-fold refits keep
    the out-of-fold meta-features close to what the fully fitted members
    produce at inference time, which 5 folds measurably does not.
    """

    specs: tuple[LearnerSpec, ...] = field(default_factory=default_layer_specs)
    policy: ConfidencePolicy = field(default_factory=ConfidencePolicy)
    folds: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.specs) < 2:
            raise ValueError("need at least 2 base specs")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


def default_config(
    seed: int = 0,
    epsilon: float = 0.4,
    route_threshold: float = 0.51,
    folds: int = 10,
    learner_overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> TpisConfig:
    return TpisConfig(
        specs=default_layer_specs(learner_overrides),
        policy=ConfidencePolicy(epsilon=epsilon, route_threshold=route_threshold),
        folds=folds,
        seed=seed,
    )


class TpisModel:
    """Immutable fitted model: scaler, the three ensemble layers, the policy
    and the feature-order manifest."""

    def __init__(
        self,
        scaler: ScalerState,
        layer1: EnsembleLayer,
        layer2: EnsembleLayer,
        step2_layer: EnsembleLayer,
        policy: ConfidencePolicy,
        folds: int,
        seed: int,
    ):
        n1, n2 = len(STEP1_FIELDS), len(STEP2_FIELDS)
        if scaler.n_features != n1 + n2:
            raise ShapeError(f"scaler must cover {n1 + n2} features")
        if layer2.n_features != len(layer1):
            raise ShapeError("layer 2 input width must equal layer 1 size")
        if step2_layer.n_features != n2 + len(layer2):
            raise ShapeError("step-2 layer input width must equal lab/CXR + layer-2 size")
        self.scaler = scaler
        self.layer1 = layer1
        self.layer2 = layer2
        self.step2_layer = step2_layer
        self.policy = policy
        self.folds = int(folds)
        self.seed = int(seed)
        self.manifest: tuple[str, ...] = STEP1_FIELDS + STEP2_FIELDS
        self._scaler1 = ScalerState(scaler.mins[:n1], scaler.maxs[:n1])
        self._scaler2 = ScalerState(scaler.mins[n1:], scaler.maxs[n1:])

    def scale_step1(self, X: np.ndarray) -> np.ndarray:
        return apply_scaler(self._scaler1, X)

    def scale_step2(self, X: np.ndarray) -> np.ndarray:
        return apply_scaler(self._scaler2, X)


def _training_matrices(
    records: Sequence[PatientRecord],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not records:
        raise EmptyDataset("no training records")
    X1, X2, y = [], [], []
    missing_step2 = [r.id for r in records if r.step2 is None or not r.step2.complete]
    if missing_step2:
        raise StepTwoUnavailable(
            f"{len(missing_step2)} training records lack complete step-2 features "
            f"(first: {missing_step2[:5]})"
        )
    for rec in records:
        if not rec.step1.complete:
            raise IncompleteFeatures(f"record {rec.id!r} has missing step-1 features")
        if rec.label is None:
            raise ValueError(f"record {rec.id!r} has no label")
        X1.append(rec.step1.to_vector())
        X2.append(rec.step2.to_vector())
        y.append(1 if rec.label is Label.TB else 0)
    y_arr = np.asarray(y, dtype=int)
    if len(np.unique(y_arr)) < 2:
        raise DegenerateLabels("training cohort contains a single class")
    return np.asarray(X1), np.asarray(X2), y_arr


def _fit_tpis_artifacts(
    records: Sequence[PatientRecord], config: TpisConfig
) -> tuple[TpisModel, np.ndarray]:
    """Fit the model and also return layer 2's out-of-fold meta matrix."""
    X1, X2, y = _training_matrices(records)
    scaler = fit_scaler(np.hstack([X1, X2]))
    n1 = len(STEP1_FIELDS)
    scaler1 = ScalerState(scaler.mins[:n1], scaler.maxs[:n1])
    scaler2 = ScalerState(scaler.mins[n1:], scaler.maxs[n1:])
    X1s = apply_scaler(scaler1, X1)
    X2s = apply_scaler(scaler2, X2)

    def layer_specs(layer_name: str) -> list[LearnerSpec]:
        return [
            spec.with_seed(derive_seed(config.seed, layer_name, j))
            for j, spec in enumerate(config.specs)
        ]

    layer1, meta1 = fit_layer(
        layer_specs("layer1"), X1s, y, config.folds, derive_seed(config.seed, "folds", 1)
    )
    layer2, meta2 = fit_layer(
        layer_specs("layer2"), meta1, y, config.folds, derive_seed(config.seed, "folds", 2)
    )
    step2_layer, _ = fit_layer(
        layer_specs("step2"),
        np.hstack([X2s, meta2]),
        y,
        config.folds,
        derive_seed(config.seed, "folds", 3),
    )
    model = TpisModel(scaler, layer1, layer2, step2_layer, config.policy, config.folds, config.seed)
    return model, meta2


def fit_tpis(records: Sequence[PatientRecord], config: TpisConfig | None = None) -> TpisModel:
    """Train the full two-step model on complete raw-unit records."""
    model, _ = _fit_tpis_artifacts(records, config or TpisConfig())
    return model


# inference ------------------------------------------------------------------


def _step1_vector(features: StepOneFeatures | np.ndarray) -> np.ndarray:
    x = features.to_vector() if isinstance(features, StepOneFeatures) else np.asarray(features, dtype=float)
    if x.shape != (len(STEP1_FIELDS),):
        raise ShapeError(f"expected {len(STEP1_FIELDS)} step-1 values, got {x.shape}")
    if np.isnan(x).any():
        raise IncompleteFeatures("step-1 features must be complete (impute first)")
    return x


def _step2_vector(features: StepTwoFeatures | np.ndarray) -> np.ndarray:
    x = features.to_vector() if isinstance(features, StepTwoFeatures) else np.asarray(features, dtype=float)
    if x.shape != (len(STEP2_FIELDS),):
        raise ShapeError(f"expected {len(STEP2_FIELDS)} step-2 values, got {x.shape}")
    if np.isnan(x).any():
        raise IncompleteFeatures("step-2 features must be complete (impute first)")
    return x


def early_diagnose(
    model: TpisModel, features: StepOneFeatures | np.ndarray
) -> tuple[Label | None, float, VotePanel]:
    """Step 1: returns (label or None for undetermined, confidence score,
    layer-2 meta-feature panel)."""
    x1 = model.scale_step1(_step1_vector(features))
    meta1 = model.layer1.panel(x1)
    meta2 = model.layer2.panel(np.asarray(meta1.probs))
    return vote_label(meta2, model.policy), confidence_score(meta2, model.policy), meta2


def final_diagnose(
    model: TpisModel,
    meta2: VotePanel | Sequence[float],
    features: StepTwoFeatures | np.ndarray,
) -> Label:
    """Step 2: hard-majority vote of the step-2 ensemble on labs + CXR
    keywords + meta-features. A tie (impossible with an odd layer) resolves
    to TB, the positive class."""
    probs = tuple(meta2.probs) if isinstance(meta2, VotePanel) else tuple(float(v) for v in meta2)
    if len(probs) != len(model.layer2):
        raise ShapeError(f"expected {len(model.layer2)} meta-features, got {len(probs)}")
    x2 = model.scale_step2(_step2_vector(features))
    panel = model.step2_layer.panel(np.concatenate([x2, probs]))
    tb_votes = sum(1 for p in panel.probs if p >= 0.5)
    return Label.TB if tb_votes >= len(panel) / 2.0 else Label.PNEUMONIA


# batch inference used by the workflow and the evaluation harness -----------


def early_diagnose_batch(
    model: TpisModel, X1_raw: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized step 1 over rows. Returns (votes, cs, meta2_matrix) where
    votes[i] is +1 TB, -1 pneumonia, 0 undetermined."""
    X1s = model.scale_step1(np.atleast_2d(np.asarray(X1_raw, dtype=float)))
    meta1 = model.layer1.panel_matrix(X1s)
    meta2 = model.layer2.panel_matrix(meta1)
    eps = model.policy.epsilon
    tb = (meta2 > eps).sum(axis=1)
    pn = ((1.0 - meta2) > eps).sum(axis=1)
    total = tb + pn
    cs = np.where(total == 0, 0.0, np.abs(tb - pn) / np.maximum(total, 1))
    votes = np.sign(tb - pn).astype(int)
    return votes, cs.astype(float), meta2


def final_diagnose_batch(
    model: TpisModel, meta2: np.ndarray, X2_raw: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized step 2. Returns (labels as 0/1, mean panel probability)."""
    X2s = model.scale_step2(np.atleast_2d(np.asarray(X2_raw, dtype=float)))
    fs4 = np.hstack([X2s, np.atleast_2d(meta2)])
    panel = model.step2_layer.panel_matrix(fs4)
    tb_votes = (panel >= 0.5).sum(axis=1)
    labels = (tb_votes >= panel.shape[1] / 2.0).astype(int)
    return labels, panel.mean(axis=1)


# cohort workflow ------------------------------------------------------------


class Stage(Enum):
    STEP1 = "step1"
    STEP2 = "step2"


@dataclass(frozen=True)
class TriageOutcome:
    patient_id: str
    early_label: Label | None
    cs: float
    routed: bool
    final_label: Label
    stage: Stage


@dataclass(frozen=True)
class ClassRoutingStats:
    n: int
    routed_fraction: float
    step1_error_fraction: float
    step2_error_fraction: float
    cs_buckets: tuple[tuple[float, dict[str, float]], ...]


@dataclass(frozen=True)
class RoutingReport:
    per_class: dict[Label, ClassRoutingStats]
    misdiagnosed: int
    n_labeled: int
    n_unlabeled: int
    aggregate_accuracy: float


def run_workflow(
    model: TpisModel, records: Sequence[PatientRecord]
) -> tuple[list[TriageOutcome], RoutingReport]:
    """Triage every record: early diagnosis, routing below the CS threshold
    (undetermined always routes), final diagnosis for routed patients.

    Raises StepTwoUnavailable naming every routed record that lacks complete
    step-2 features. The report aggregates fractions over labeled records.
    """
    if not records:
        raise EmptyDataset("no records to triage")
    X1 = np.array([_step1_vector(r.step1) for r in records])
    votes, cs, meta2 = early_diagnose_batch(model, X1)
    routed = (cs < model.policy.route_threshold) | (votes == 0)

    lacking = [r.id for r, flag in zip(records, routed) if flag and (r.step2 is None or not r.step2.complete)]
    if lacking:
        raise StepTwoUnavailable(
            f"{len(lacking)} routed records lack step-2 features: {lacking}"
        )

    final_int = np.where(votes > 0, 1, 0)
    routed_idx = np.nonzero(routed)[0]
    if routed_idx.size:
        X2 = np.array([records[i].step2.to_vector() for i in routed_idx])
        labels, _ = final_diagnose_batch(model, meta2[routed_idx], X2)
        final_int[routed_idx] = labels

    outcomes = []
    for i, rec in enumerate(records):
        early = Label.TB if votes[i] > 0 else (Label.PNEUMONIA if votes[i] < 0 else None)
        outcomes.append(
            TriageOutcome(
                patient_id=rec.id,
                early_label=early,
                cs=float(cs[i]),
                routed=bool(routed[i]),
                final_label=Label.TB if final_int[i] == 1 else Label.PNEUMONIA,
                stage=Stage.STEP2 if routed[i] else Stage.STEP1,
            )
        )
    return outcomes, _build_report(records, outcomes)


def _build_report(
    records: Sequence[PatientRecord], outcomes: Sequence[TriageOutcome]
) -> RoutingReport:
    per_class: dict[Label, ClassRoutingStats] = {}
    wrong_total = 0
    labeled = [(r, o) for r, o in zip(records, outcomes) if r.label is not None]
    for cls in (Label.PNEUMONIA, Label.TB):
        rows = [(r, o) for r, o in labeled if r.label is cls]
        n = len(rows)
        if n == 0:
            per_class[cls] = ClassRoutingStats(0, 0.0, 0.0, 0.0, ())
            continue
        routed_rows = [o for _, o in rows if o.routed]
        confident_wrong = sum(1 for r, o in rows if not o.routed and o.final_label is not r.label)
        step2_wrong = sum(1 for r, o in rows if o.routed and o.final_label is not r.label)
        wrong_total += confident_wrong + step2_wrong
        buckets: dict[float, dict[str, float]] = {}
        for _, o in rows:
            key = round(o.cs, 12)
            slot = buckets.setdefault(key, {"P": 0.0, "TB": 0.0, "undetermined": 0.0})
            if o.early_label is None:
                slot["undetermined"] += 1.0 / n
            elif o.early_label is Label.TB:
                slot["TB"] += 1.0 / n
            else:
                slot["P"] += 1.0 / n
        per_class[cls] = ClassRoutingStats(
            n=n,
            routed_fraction=len(routed_rows) / n,
            step1_error_fraction=confident_wrong / n,
            step2_error_fraction=(step2_wrong / len(routed_rows)) if routed_rows else 0.0,
            cs_buckets=tuple(sorted(buckets.items())),
        )
    n_labeled = len(labeled)
    accuracy = 1.0 - wrong_total / n_labeled if n_labeled else 0.0
    return RoutingReport(
        per_class=per_class,
        misdiagnosed=wrong_total,
        n_labeled=n_labeled,
        n_unlabeled=len(records) - n_labeled,
        aggregate_accuracy=accuracy,
    )


def step2_everywhere_accuracy(model: TpisModel, records: Sequence[PatientRecord]) -> float:
    """Accuracy when every labeled record skips routing and goes to step 2."""
    labeled = [r for r in records if r.label is not None]
    if not labeled:
        raise EmptyDataset("no labeled records")
    X1 = np.array([_step1_vector(r.step1) for r in labeled])
    _, _, meta2 = early_diagnose_batch(model, X1)
    X2 = np.array([_step2_vector(r.step2) for r in labeled])
    labels, _ = final_diagnose_batch(model, meta2, X2)
    truth = np.array([1 if r.label is Label.TB else 0 for r in labeled])
    return float((labels == truth).mean())


# the published-fraction arithmetic ------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PublishedStepOne:
    """Step-1 outcome fractions per true class: the routed CS-bucket
    fractions, the confidently-wrong fraction, and the class sizes."""

    routed_buckets: Mapping[Label, tuple[float, ...]]
    confident_wrong: Mapping[Label, float]
    class_sizes: Mapping[Label, int]

    def __post_init__(self) -> None:
        for cls in (Label.PNEUMONIA, Label.TB):
            buckets = self.routed_buckets[cls]
            wrong = self.confident_wrong[cls]
            for f in (*buckets, wrong):
                if not (0.0 <= f <= 1.0):
                    raise InvalidTable(f"fraction {f!r} outside [0, 1]")
            if sum(buckets) + wrong > 1.0 + 1e-9:
                raise InvalidTable(f"class {cls.value} fractions sum past 1")
            if self.class_sizes[cls] < 1:
                raise InvalidTable("class sizes must be positive")


@dataclass(frozen=True)
class PublishedStepTwo:
    """Step-2 error fractions among routed patients, per true class."""

    wrong_of_routed: Mapping[Label, float]

    def __post_init__(self) -> None:
        for cls in (Label.PNEUMONIA, Label.TB):
            f = self.wrong_of_routed[cls]
            if not (0.0 <= f <= 1.0):
                raise InvalidTable(f"fraction {f!r} outside [0, 1]")


@dataclass(frozen=True)
class AggregateAccuracy:
    misdiagnosed: int
    total: int
    accuracy: float
    per_class_misdiagnosed: dict[Label, int]


def aggregate_accuracy(step1: PublishedStepOne, step2: PublishedStepTwo) -> AggregateAccuracy:
    """Whole-cohort accuracy from published per-class fractions.

    Error counts are rounded to whole patients per class and per stage
    (round half up) before summing, mirroring how the source tables are
    expressed in whole patients.
    """
    total = 0
    wrong = 0
    per_class: dict[Label, int] = {}
    for cls in (Label.PNEUMONIA, Label.TB):
        size = int(step1.class_sizes[cls])
        routed_fraction = float(sum(step1.routed_buckets[cls]))
        step1_wrong = _round_half_up(step1.confident_wrong[cls] * size)
        step2_wrong = _round_half_up(step2.wrong_of_routed[cls] * routed_fraction * size)
        per_class[cls] = step1_wrong + step2_wrong
        wrong += step1_wrong + step2_wrong
        total += size
    return AggregateAccuracy(
        misdiagnosed=wrong,
        total=total,
        accuracy=1.0 - wrong / total,
        per_class_misdiagnosed=per_class,
    )
