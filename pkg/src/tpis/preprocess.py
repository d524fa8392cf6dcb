"""Data preparation: min-max scaling, boxplot outliers, missing-rate screening,
K-NN imputation and balanced train/test splitting.

Matrices are 2-D float arrays where NaN marks a missing cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import BINARY_FIELDS, NUMERIC_FIELDS, Label, PatientRecord, STEP1_FIELDS, STEP2_FIELDS
from .errors import (
    EmptyDataset,
    InsufficientClassSize,
    InsufficientData,
    ShapeError,
    UnimputableColumn,
)
from .rng import derive_seed, make_rng


@dataclass(frozen=True)
class ScalerState:
    """Per-feature (min, max) learned on training data.

    Columns where max == min are constant and map to 0 on apply.
    """

    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mins) != len(self.maxs):
            raise ShapeError("mins and maxs must have equal length")
        for lo, hi in zip(self.mins, self.maxs):
            if hi < lo:
                raise ValueError(f"max {hi} < min {lo}")

    @property
    def n_features(self) -> int:
        return len(self.mins)

    @property
    def constant_mask(self) -> np.ndarray:
        return np.asarray(self.maxs) == np.asarray(self.mins)


def fit_scaler(X: np.ndarray) -> ScalerState:
    """Learn per-column min and max, ignoring missing cells."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("scaler needs a non-empty 2-D matrix")
    with np.errstate(invalid="ignore"):
        mins = np.nanmin(X, axis=0)
        maxs = np.nanmax(X, axis=0)
    # a column that is missing everywhere gets a vacuous constant range
    mins = np.where(np.isnan(mins), 0.0, mins)
    maxs = np.where(np.isnan(maxs), 0.0, maxs)
    return ScalerState(tuple(float(v) for v in mins), tuple(float(v) for v in maxs))


def apply_scaler(state: ScalerState, X: np.ndarray) -> np.ndarray:
    """Map each non-missing cell to (x - min) / (max - min), clamped to [0, 1].

    Constant columns map to 0. NaN passes through. Accepts a vector or matrix.
    """
    arr = np.asarray(X, dtype=float)
    vector = arr.ndim == 1
    mat = np.atleast_2d(arr)
    if mat.shape[1] != state.n_features:
        raise ShapeError(f"scaler fitted on {state.n_features} features, got {mat.shape[1]}")
    mins = np.asarray(state.mins)
    span = np.asarray(state.maxs) - mins
    safe_span = np.where(span == 0.0, 1.0, span)
    out = (mat - mins) / safe_span
    out = np.where(span == 0.0, 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    out = np.where(np.isnan(mat), np.nan, out)
    return out[0] if vector else out


def _whisker_bounds(values: np.ndarray) -> tuple[float, float]:
    observed = ~np.isnan(values)
    if int(observed.sum()) < 4:
        raise InsufficientData("boxplot whiskers need at least 4 non-missing values")
    q1, q3 = np.percentile(values[observed], [25.0, 75.0], method="linear")
    iqr = q3 - q1
    return float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr)


def flag_outliers_boxplot(values: Sequence[float]) -> set[int]:
    """Indices of values outside the boxplot whiskers Q1 - 1.5 IQR, Q3 + 1.5 IQR.

    Quartiles use linear interpolation between order statistics. Missing
    values are ignored and never flagged. Needs at least 4 observed values.
    """
    arr = np.asarray(values, dtype=float)
    lo, hi = _whisker_bounds(arr)
    with np.errstate(invalid="ignore"):
        flagged = ~np.isnan(arr) & ((arr < lo) | (arr > hi))
    return set(int(i) for i in np.nonzero(flagged)[0])


def drop_high_missing(X: np.ndarray, threshold: float = 0.30) -> list[int]:
    """Column indices whose missing fraction does not exceed ``threshold``.

    The rule is strict: a column is dropped only when its missing fraction
    is greater than the threshold.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("missing-rate screening needs a non-empty matrix")
    rates = np.isnan(X).mean(axis=0)
    return [int(j) for j in range(X.shape[1]) if rates[j] <= threshold]


def _normalized_for_distance(X: np.ndarray, donors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # distances are computed on min-max normalized values; statistics come
    # from the donor pool so target rows cannot shift them
    state = fit_scaler(donors)
    return apply_scaler(state, X), apply_scaler(state, donors)


def impute_knn_from(
    X: np.ndarray,
    donors: np.ndarray,
    k: int = 5,
    binary_cols: Sequence[int] = (),
) -> np.ndarray:
    """Fill missing cells of ``X`` using the k nearest rows of ``donors``.

    Distance between two rows is the Euclidean distance over their shared
    non-missing features, scaled by the shared-dimension count:
    sqrt(sum((a_j - b_j)^2) / n_shared). For each missing cell the candidate
    donors are rows where that column is present; numeric cells take the mean
    of the k nearest candidates, binary cells the majority value (ties and
    exhausted candidates default to 0, the symptom-absent convention). When
    ``X`` and ``donors`` are the same array, a row never donates to itself.
    """
    X = np.asarray(X, dtype=float)
    donors_arr = np.asarray(donors, dtype=float)
    if X.ndim != 2 or donors_arr.ndim != 2:
        raise ShapeError("imputation expects 2-D matrices")
    if X.shape[1] != donors_arr.shape[1]:
        raise ShapeError("target and donor matrices must share columns")
    if k < 1:
        raise ValueError("k must be >= 1")
    self_pool = X is donors or (
        X.shape == donors_arr.shape and np.array_equal(X, donors_arr, equal_nan=True)
    )

    donor_present = ~np.isnan(donors_arr)
    for j in range(X.shape[1]):
        if np.isnan(X[:, j]).any() and not donor_present[:, j].any():
            raise UnimputableColumn(f"column {j} is missing in every donor row")

    Xn, Dn = _normalized_for_distance(X, donors_arr)
    binary = set(int(c) for c in binary_cols)
    out = X.copy()

    target_missing = np.isnan(X)
    for i in np.nonzero(target_missing.any(axis=1))[0]:
        row = Xn[i]
        row_present = ~np.isnan(row)
        if not row_present.any():
            raise ValueError(f"row {i} has no observed features to match on")
        shared = row_present & donor_present
        n_shared = shared.sum(axis=1)
        diffs = np.where(shared, Dn - row, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.sqrt(np.einsum("ij,ij->i", diffs, diffs) / n_shared)
        dist = np.where(n_shared == 0, np.inf, dist)
        if self_pool:
            dist[i] = np.inf

        for j in np.nonzero(target_missing[i])[0]:
            candidates = np.nonzero(donor_present[:, j] & np.isfinite(dist))[0]
            if candidates.size == 0:
                # no reachable donor: fall back to the pool-wide convention
                if j in binary:
                    out[i, j] = 0.0
                else:
                    out[i, j] = float(np.nanmean(donors_arr[:, j]))
                continue
            order = candidates[np.argsort(dist[candidates], kind="stable")]
            nearest = order[:k]
            neighbor_values = donors_arr[nearest, j]
            if j in binary:
                ones = float((neighbor_values == 1.0).sum())
                out[i, j] = 1.0 if ones > nearest.size / 2.0 else 0.0
            else:
                out[i, j] = float(neighbor_values.mean())
    return out


def impute_knn(X: np.ndarray, k: int = 5, binary_cols: Sequence[int] = ()) -> np.ndarray:
    """Complete a matrix in place of its own donor pool. See ``impute_knn_from``."""
    X = np.asarray(X, dtype=float)
    return impute_knn_from(X, X, k=k, binary_cols=binary_cols)


@dataclass(frozen=True)
class SplitSpec:
    """Equal-size per-class training draw; everything else becomes the test set."""

    train_per_class: int
    seed: int

    def __post_init__(self) -> None:
        if self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")


def balanced_split(
    records: Sequence[PatientRecord], spec: SplitSpec
) -> tuple[list[PatientRecord], list[PatientRecord]]:
    """Sample ``train_per_class`` records per class without replacement.

    The draw is deterministic in ``spec.seed``. Records keep their original
    relative order inside each partition. Unlabeled records are rejected.
    """
    by_class: dict[Label, list[int]] = {Label.TB: [], Label.PNEUMONIA: []}
    for idx, rec in enumerate(records):
        if rec.label is None:
            raise ValueError(f"record {rec.id!r} has no label; balanced_split needs labels")
        by_class[rec.label].append(idx)
    train_idx: set[int] = set()
    for label, indices in by_class.items():
        if len(indices) < spec.train_per_class:
            raise InsufficientClassSize(
                f"class {label.value} has {len(indices)} records, "
                f"need {spec.train_per_class}"
            )
        rng = make_rng(derive_seed(spec.seed, "balanced_split", label.value))
        chosen = rng.choice(len(indices), size=spec.train_per_class, replace=False)
        train_idx.update(indices[int(c)] for c in chosen)
    train = [records[i] for i in range(len(records)) if i in train_idx]
    test = [records[i] for i in range(len(records)) if i not in train_idx]
    return train, test


# column bookkeeping for record-level preprocessing -------------------------

_ALL_FIELDS = STEP1_FIELDS + STEP2_FIELDS
NUMERIC_COLS: tuple[int, ...] = tuple(_ALL_FIELDS.index(f) for f in NUMERIC_FIELDS)
BINARY_COLS: tuple[int, ...] = tuple(_ALL_FIELDS.index(f) for f in BINARY_FIELDS)


def records_matrix(records: Sequence[PatientRecord]) -> np.ndarray:
    """Stack records into an (n, 28) matrix in canonical column order."""
    if not records:
        raise EmptyDataset("no records")
    rows = []
    for rec in records:
        step2 = rec.step2.to_vector() if rec.step2 is not None else np.full(len(STEP2_FIELDS), np.nan)
        rows.append(np.concatenate([rec.step1.to_vector(), step2]))
    return np.array(rows)


def matrix_records(
    X: np.ndarray, template: Sequence[PatientRecord]
) -> list[PatientRecord]:
    """Rebuild records from a (possibly modified) canonical matrix."""
    from .domain import StepOneFeatures, StepTwoFeatures

    n1 = len(STEP1_FIELDS)
    out = []
    for row, rec in zip(np.asarray(X, dtype=float), template):
        out.append(
            PatientRecord(
                id=rec.id,
                step1=StepOneFeatures.from_vector(row[:n1]),
                step2=StepTwoFeatures.from_vector(row[n1:]),
                label=rec.label,
            )
        )
    return out


def prepare_records(
    records: Sequence[PatientRecord],
    donors: Sequence[PatientRecord] | None = None,
    k: int = 5,
) -> list[PatientRecord]:
    """Outlier-mask the numeric columns, then K-NN impute every missing cell.

    Boxplot outliers are set missing and re-imputed rather than dropping
    whole rows. When ``donors`` is given (for example the training split),
    its rows are the imputation pool; otherwise the records impute from
    themselves. Returns complete records in raw units.
    """
    X = records_matrix(records)
    donor_X = records_matrix(donors) if donors is not None else X
    for j in NUMERIC_COLS:
        donor_col = donor_X[:, j]
        if (~np.isnan(donor_col)).sum() < 4:
            continue
        lo, hi = _whisker_bounds(donor_col)
        with np.errstate(invalid="ignore"):
            mask = ~np.isnan(X[:, j]) & ((X[:, j] < lo) | (X[:, j] > hi))
        X[mask, j] = np.nan
        if donors is not None:
            donor_mask = ~np.isnan(donor_col) & ((donor_col < lo) | (donor_col > hi))
            donor_X[donor_mask, j] = np.nan
    completed = impute_knn_from(X, donor_X, k=k, binary_cols=BINARY_COLS)
    return matrix_records(completed, records)
