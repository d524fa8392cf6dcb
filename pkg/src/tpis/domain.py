"""Shared data vocabulary: patients, features, labels, feature sets, confusion counts.

Column orders declared here are canonical for the whole project. Matrices,
CSV files and service request bodies all use them; nothing may reorder them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import MissingMetaFeatures, ShapeError


class Label(Enum):
    """Diagnosis classes. TB is the positive class everywhere in the project."""

    TB = "TB"
    PNEUMONIA = "P"


STEP1_FIELDS: tuple[str, ...] = (
    "age",
    "gender",
    "cough",
    "sputum",
    "bloody_sputum",
    "fever",
    "shaking",
    "smoking",
    "joint_pain",
    "edema",
    "asthma",
    "diabetes",
    "cyanosis",
    "weight_loss",
    "weakness",
    "lung_sound_abnormal",
    "dyspnea",
    "orthopnea",
)

STEP2_FIELDS: tuple[str, ...] = (
    "wbc",
    "hemoglobin",
    "hematocrit",
    "neutrophil",
    "lymphocyte",
    "mcv",
    "crp",
    "esr",
    "lung_abnormalities_cxr",
    "white_spots_cxr",
)

# age plus the eight laboratory values; everything else is a 0/1 flag
# (Yes/Abnormal/Male encode to 1, No/Normal/Female to 0).
NUMERIC_FIELDS: tuple[str, ...] = (
    "age",
    "wbc",
    "hemoglobin",
    "hematocrit",
    "neutrophil",
    "lymphocyte",
    "mcv",
    "crp",
    "esr",
)
BINARY_FIELDS: tuple[str, ...] = tuple(
    f for f in STEP1_FIELDS + STEP2_FIELDS if f not in NUMERIC_FIELDS
)

AGE_RANGE = (0.0, 130.0)


def is_missing(value: float) -> bool:
    return math.isnan(value)


def _validate_binary(name: str, value: float) -> None:
    if not math.isnan(value) and value not in (0.0, 1.0):
        raise ValueError(f"{name} must be 0, 1 or missing, got {value!r}")


class _NanAwareEquality:
    """Value semantics for feature bundles: missing equals missing."""

    _FIELD_ORDER: tuple[str, ...] = ()

    def _key(self) -> tuple:
        return tuple(
            None if math.isnan(v := float(getattr(self, name))) else v
            for name in self._FIELD_ORDER
        )

    def __eq__(self, other: object) -> bool:
        if other.__class__ is not self.__class__:
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


@dataclass(frozen=True, eq=False)
class StepOneFeatures(_NanAwareEquality):
    """The 18 low-cost features: age, gender and 16 symptom flags.

    NaN marks a missing value. Binary fields are 0/1.
    """

    _FIELD_ORDER = STEP1_FIELDS

    age: float = math.nan
    gender: float = math.nan
    cough: float = math.nan
    sputum: float = math.nan
    bloody_sputum: float = math.nan
    fever: float = math.nan
    shaking: float = math.nan
    smoking: float = math.nan
    joint_pain: float = math.nan
    edema: float = math.nan
    asthma: float = math.nan
    diabetes: float = math.nan
    cyanosis: float = math.nan
    weight_loss: float = math.nan
    weakness: float = math.nan
    lung_sound_abnormal: float = math.nan
    dyspnea: float = math.nan
    orthopnea: float = math.nan

    def __post_init__(self) -> None:
        age = float(self.age)
        if not math.isnan(age) and not (AGE_RANGE[0] <= age <= AGE_RANGE[1]):
            raise ValueError(f"age must be in {AGE_RANGE} or missing, got {age!r}")
        for name in STEP1_FIELDS[1:]:
            _validate_binary(name, float(getattr(self, name)))

    def to_vector(self) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in STEP1_FIELDS], dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "StepOneFeatures":
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (len(STEP1_FIELDS),):
            raise ShapeError(f"expected {len(STEP1_FIELDS)} step-1 values, got shape {arr.shape}")
        return cls(**{n: float(v) for n, v in zip(STEP1_FIELDS, arr)})

    @property
    def complete(self) -> bool:
        return not any(math.isnan(float(getattr(self, n))) for n in STEP1_FIELDS)


@dataclass(frozen=True, eq=False)
class StepTwoFeatures(_NanAwareEquality):
    """Eight laboratory values plus two chest-X-ray report keywords."""

    _FIELD_ORDER = STEP2_FIELDS

    wbc: float = math.nan
    hemoglobin: float = math.nan
    hematocrit: float = math.nan
    neutrophil: float = math.nan
    lymphocyte: float = math.nan
    mcv: float = math.nan
    crp: float = math.nan
    esr: float = math.nan
    lung_abnormalities_cxr: float = math.nan
    white_spots_cxr: float = math.nan

    def __post_init__(self) -> None:
        for name in STEP2_FIELDS[:8]:
            value = float(getattr(self, name))
            if not math.isnan(value) and not math.isfinite(value):
                raise ValueError(f"{name} must be finite or missing, got {value!r}")
        for name in STEP2_FIELDS[8:]:
            _validate_binary(name, float(getattr(self, name)))

    def to_vector(self) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in STEP2_FIELDS], dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "StepTwoFeatures":
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (len(STEP2_FIELDS),):
            raise ShapeError(f"expected {len(STEP2_FIELDS)} step-2 values, got shape {arr.shape}")
        return cls(**{n: float(v) for n, v in zip(STEP2_FIELDS, arr)})

    @property
    def complete(self) -> bool:
        return not any(math.isnan(float(getattr(self, n))) for n in STEP2_FIELDS)


@dataclass(frozen=True)
class PatientRecord:
    """One patient: step-1 features, optional step-2 features, optional label."""

    id: str
    step1: StepOneFeatures
    step2: StepTwoFeatures | None = None
    label: Label | None = None


class FeatureSetId(Enum):
    """Selectors for the feature combinations used in training and evaluation.

    FS1 symptoms + demographics, FS2 labs + CXR keywords, FS3 meta-features,
    FS4 = FS2 with FS3, FS5 = FS1 with FS2.
    """

    FS1 = "FS1"
    FS2 = "FS2"
    FS3 = "FS3"
    FS4 = "FS4"
    FS5 = "FS5"


def feature_names(fs: FeatureSetId, n_meta: int = 5) -> tuple[str, ...]:
    """Column names for ``fs``, in the exact order ``select_features`` emits."""
    meta = tuple(f"meta_{i + 1}" for i in range(n_meta))
    if fs is FeatureSetId.FS1:
        return STEP1_FIELDS
    if fs is FeatureSetId.FS2:
        return STEP2_FIELDS
    if fs is FeatureSetId.FS3:
        return meta
    if fs is FeatureSetId.FS4:
        return STEP2_FIELDS + meta
    return STEP1_FIELDS + STEP2_FIELDS


def select_features(
    record: PatientRecord,
    fs: FeatureSetId,
    meta2: Sequence[float] | None = None,
) -> np.ndarray:
    """Concatenate the feature values ``fs`` selects, in canonical column order.

    Missing values are preserved as NaN. A record without step-2 data yields
    NaN for every step-2 column. FS3 and FS4 need the layer-2 meta-feature
    vector ``meta2`` (one probability per base classifier).
    """
    step2 = record.step2.to_vector() if record.step2 is not None else np.full(len(STEP2_FIELDS), np.nan)
    if fs in (FeatureSetId.FS3, FeatureSetId.FS4):
        if meta2 is None:
            raise MissingMetaFeatures(f"{fs.value} requires meta-features but none were given")
        meta = np.asarray(list(meta2), dtype=float)
        if meta.ndim != 1:
            raise ShapeError(f"meta2 must be a flat vector, got shape {meta.shape}")
        if fs is FeatureSetId.FS3:
            return meta
        return np.concatenate([step2, meta])
    if fs is FeatureSetId.FS1:
        return record.step1.to_vector()
    if fs is FeatureSetId.FS2:
        return step2
    return np.concatenate([record.step1.to_vector(), step2])


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/FP/FN/TN counts with TB as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn
