"""Synthetic cohort generation from published class-conditional marginals.

The real cohort is private, so experiments run on synthetic patients whose
per-class feature distributions match the published tables: numeric features
are truncated normals (mean, std, clipped to the published min/max), binary
features are conditional Bernoulli draws, and optional missingness masks
cells at the published per-class missing rates. Features are sampled
independently given the class; no correlation structure is published, and
that independence is the key realism limitation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .domain import (
    BINARY_FIELDS,
    Label,
    NUMERIC_FIELDS,
    PatientRecord,
    STEP1_FIELDS,
    STEP2_FIELDS,
    StepOneFeatures,
    StepTwoFeatures,
)
from .errors import SpecError
from .rng import derive_seed, make_rng

SPEC_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NumericFeatureSpec:
    min: float
    mean: float
    median: float
    max: float
    std: float
    missing_rate: float = 0.0


@dataclass(frozen=True)
class BinaryFeatureSpec:
    rate: float
    missing_rate: float = 0.0


@dataclass(frozen=True)
class CohortSpec:
    """Class-conditional distribution parameters for every cohort feature."""

    version: int
    class_counts: Mapping[Label, int]
    numeric: Mapping[str, Mapping[Label, NumericFeatureSpec]]
    binary: Mapping[str, Mapping[Label, BinaryFeatureSpec]]

    def __post_init__(self) -> None:
        for cls, count in self.class_counts.items():
            if count < 1:
                raise SpecError(f"class {cls.value} count must be >= 1")
        if set(self.numeric) != set(NUMERIC_FIELDS):
            raise SpecError("numeric features must cover exactly the canonical numeric fields")
        if set(self.binary) != set(BINARY_FIELDS):
            raise SpecError("binary features must cover exactly the canonical binary fields")
        for name, per_class in self.numeric.items():
            for cls, f in per_class.items():
                if not (f.min <= f.median <= f.max):
                    raise SpecError(f"{name}/{cls.value}: need min <= median <= max")
                if f.std < 0:
                    raise SpecError(f"{name}/{cls.value}: std must be >= 0")
                if not (0.0 <= f.missing_rate <= 1.0):
                    raise SpecError(f"{name}/{cls.value}: missing rate outside [0, 1]")
        for name, per_class in self.binary.items():
            for cls, b in per_class.items():
                if not (0.0 <= b.rate <= 1.0):
                    raise SpecError(f"{name}/{cls.value}: rate outside [0, 1]")
                if not (0.0 <= b.missing_rate <= 1.0):
                    raise SpecError(f"{name}/{cls.value}: missing rate outside [0, 1]")

    @property
    def tb_prevalence(self) -> float:
        total = sum(self.class_counts.values())
        return self.class_counts[Label.TB] / total


def spec_from_dict(doc: dict) -> CohortSpec:
    if doc.get("format_version") != SPEC_FORMAT_VERSION:
        raise SpecError(
            f"cohort spec format_version {doc.get('format_version')!r} "
            f"is not the supported {SPEC_FORMAT_VERSION}"
        )
    try:
        class_counts = {
            Label.PNEUMONIA: int(doc["class_counts"]["P"]),
            Label.TB: int(doc["class_counts"]["TB"]),
        }
        numeric = {}
        for name, per_class in doc["numeric"].items():
            numeric[name] = {}
            for key, cls in (("P", Label.PNEUMONIA), ("TB", Label.TB)):
                cell = per_class[key]
                numeric[name][cls] = NumericFeatureSpec(
                    min=float(cell["min"]),
                    mean=float(cell["mean"]),
                    median=float(cell["median"]),
                    max=float(cell["max"]),
                    std=float(cell["std"]),
                    missing_rate=float(cell.get("missing_rate", 0.0)),
                )
        binary = {}
        for name, per_class in doc["binary"].items():
            binary[name] = {}
            for key, cls in (("P", Label.PNEUMONIA), ("TB", Label.TB)):
                cell = per_class[key]
                observed = int(cell["no"]) + int(cell["yes"])
                if observed < 1:
                    raise SpecError(f"{name}/{key}: no observed values")
                rate = int(cell["yes"]) / observed
                missing = 1.0 - observed / class_counts[cls]
                if missing < 0:
                    raise SpecError(f"{name}/{key}: observed count exceeds class size")
                binary[name][cls] = BinaryFeatureSpec(rate=rate, missing_rate=missing)
    except KeyError as exc:
        raise SpecError(f"cohort spec is missing {exc}") from exc
    return CohortSpec(
        version=SPEC_FORMAT_VERSION,
        class_counts=class_counts,
        numeric=numeric,
        binary=binary,
    )


def load_spec(path: str | Path) -> CohortSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def default_spec() -> CohortSpec:
    """The transcribed published parameters shipped with the package."""
    text = resources.files("tpis.data").joinpath("cohort_spec_v1.json").read_text("utf-8")
    return spec_from_dict(json.loads(text))


def sample_columns(
    spec: CohortSpec, n: int, seed: int = 0, missing: bool = False
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Column-wise draw: returns (is_tb, {feature: values}) without building
    record objects. Deterministic per seed; the draw order is the label
    vector first, then each canonical feature column in order."""
    if n < 10:
        raise ValueError("cohort size must be >= 10")
    rng = make_rng(derive_seed(seed, "cohort"))
    is_tb = rng.random(n) < spec.tb_prevalence

    columns: dict[str, np.ndarray] = {}
    for name in STEP1_FIELDS + STEP2_FIELDS:
        if name in NUMERIC_FIELDS:
            per_class = spec.numeric[name]
            z = rng.standard_normal(n)
            mean = np.where(is_tb, per_class[Label.TB].mean, per_class[Label.PNEUMONIA].mean)
            std = np.where(is_tb, per_class[Label.TB].std, per_class[Label.PNEUMONIA].std)
            lo = np.where(is_tb, per_class[Label.TB].min, per_class[Label.PNEUMONIA].min)
            hi = np.where(is_tb, per_class[Label.TB].max, per_class[Label.PNEUMONIA].max)
            values = np.clip(mean + std * z, lo, hi)
            miss_rate = np.where(
                is_tb,
                per_class[Label.TB].missing_rate,
                per_class[Label.PNEUMONIA].missing_rate,
            )
        else:
            per_class_b = spec.binary[name]
            rate = np.where(is_tb, per_class_b[Label.TB].rate, per_class_b[Label.PNEUMONIA].rate)
            values = (rng.random(n) < rate).astype(float)
            miss_rate = np.where(
                is_tb,
                per_class_b[Label.TB].missing_rate,
                per_class_b[Label.PNEUMONIA].missing_rate,
            )
        if missing:
            mask = rng.random(n) < miss_rate
            values = np.where(mask, np.nan, values)
        columns[name] = values
    return is_tb, columns


def sample_cohort(
    spec: CohortSpec, n: int, seed: int = 0, missing: bool = False
) -> list[PatientRecord]:
    """Draw ``n`` labeled synthetic patients, deterministically per seed.

    Labels follow the class prevalence; numeric features come from class
    normals clipped to the class min/max; binaries are class Bernoulli draws.
    With ``missing`` enabled, cells are masked at the published per-class
    missing rates (masking draws consume the stream, so the two settings
    produce different cohorts even at equal seeds).
    """
    is_tb, columns = sample_columns(spec, n, seed=seed, missing=missing)
    records = []
    width = max(5, len(str(n)))
    for i in range(n):
        step1 = StepOneFeatures(**{f: float(columns[f][i]) for f in STEP1_FIELDS})
        step2 = StepTwoFeatures(**{f: float(columns[f][i]) for f in STEP2_FIELDS})
        records.append(
            PatientRecord(
                id=f"synth-{i:0{width}d}",
                step1=step1,
                step2=step2,
                label=Label.TB if is_tb[i] else Label.PNEUMONIA,
            )
        )
    return records
