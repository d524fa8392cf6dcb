"""Persistence: the cohort CSV schema and the model archive.

Cohort files are RFC-4180 CSV with the canonical header (id, label, the 18
step-1 columns, the 10 step-2 columns); empty cells are missing values.
Model archives are a self-describing JSON tree with sorted keys; floats are
written in shortest round-trip form, so saving the same model twice yields
byte-identical files and a reload predicts bit-identically.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

from .domain import (
    Label,
    PatientRecord,
    STEP1_FIELDS,
    STEP2_FIELDS,
    StepOneFeatures,
    StepTwoFeatures,
)
from .errors import ArchiveError, CellError, SchemaError, VersionError
from .learners import learner_from_dict, learner_to_dict
from .pipeline import TpisModel
from .preprocess import ScalerState
from .stacking import ConfidencePolicy, EnsembleLayer

DATASET_HEADER: tuple[str, ...] = ("id", "label") + STEP1_FIELDS + STEP2_FIELDS
ARCHIVE_FORMAT_VERSION = 1


def _format_cell(value: float) -> str:
    if math.isnan(value):
        return ""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_dataset(records: Sequence[PatientRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for rec in records:
            row = [rec.id, rec.label.value if rec.label is not None else ""]
            step1 = rec.step1.to_vector()
            step2 = rec.step2.to_vector() if rec.step2 is not None else [math.nan] * len(STEP2_FIELDS)
            row.extend(_format_cell(float(v)) for v in step1)
            row.extend(_format_cell(float(v)) for v in step2)
            writer.writerow(row)


def _parse_cell(text: str, row: int, col: str) -> float:
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise CellError(row, col, f"cannot parse {text!r} as a number") from None


def read_dataset(path: str | Path) -> list[PatientRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("dataset file is empty") from None
        if tuple(header) != DATASET_HEADER:
            unknown = [c for c in header if c not in DATASET_HEADER]
            missing = [c for c in DATASET_HEADER if c not in header]
            raise SchemaError(
                f"header does not match the canonical manifest "
                f"(unknown: {unknown}, missing: {missing})"
            )
        records = []
        seen_ids: set[str] = set()
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(DATASET_HEADER):
                raise CellError(row_num, "*", f"expected {len(DATASET_HEADER)} fields, got {len(row)}")
            rec_id = row[0]
            if rec_id in seen_ids:
                raise CellError(row_num, "id", f"duplicate record id {rec_id!r}")
            seen_ids.add(rec_id)
            label_text = row[1]
            if label_text == "":
                label = None
            elif label_text in (Label.TB.value, Label.PNEUMONIA.value):
                label = Label(label_text)
            else:
                raise CellError(row_num, "label", f"unknown label {label_text!r}")
            values = {}
            for col, text in zip(DATASET_HEADER[2:], row[2:]):
                values[col] = _parse_cell(text, row_num, col)
            try:
                step1 = StepOneFeatures(**{f: values[f] for f in STEP1_FIELDS})
                step2 = StepTwoFeatures(**{f: values[f] for f in STEP2_FIELDS})
            except ValueError as exc:
                raise CellError(row_num, "*", str(exc)) from None
            records.append(PatientRecord(id=rec_id, step1=step1, step2=step2, label=label))
    return records


# model archive ----------------------------------------------------------------


def _layer_to_dict(layer: EnsembleLayer) -> dict:
    return {
        "folds": layer.folds,
        "learners": [learner_to_dict(m) for m in layer.learners],
    }


def _layer_from_dict(doc: dict) -> EnsembleLayer:
    try:
        learners = [learner_from_dict(d) for d in doc["learners"]]
        return EnsembleLayer(learners, doc["folds"])
    except (KeyError, TypeError) as exc:
        raise ArchiveError(f"malformed layer section: {exc}") from exc


def model_to_dict(model: TpisModel) -> dict:
    return {
        "format_version": ARCHIVE_FORMAT_VERSION,
        "kind": "tpis_model",
        "manifest": list(model.manifest),
        "scaler": {"mins": list(model.scaler.mins), "maxs": list(model.scaler.maxs)},
        "policy": {
            "epsilon": model.policy.epsilon,
            "route_threshold": model.policy.route_threshold,
        },
        "folds": model.folds,
        "seed": model.seed,
        "layers": {
            "layer1": _layer_to_dict(model.layer1),
            "layer2": _layer_to_dict(model.layer2),
            "step2": _layer_to_dict(model.step2_layer),
        },
    }


def model_from_dict(doc: dict) -> TpisModel:
    if not isinstance(doc, dict) or doc.get("kind") != "tpis_model":
        raise ArchiveError("not a model archive")
    version = doc.get("format_version")
    if version != ARCHIVE_FORMAT_VERSION:
        raise VersionError(
            f"archive format_version {version!r} is not the supported {ARCHIVE_FORMAT_VERSION}"
        )
    try:
        scaler = ScalerState(tuple(doc["scaler"]["mins"]), tuple(doc["scaler"]["maxs"]))
        policy = ConfidencePolicy(
            epsilon=doc["policy"]["epsilon"],
            route_threshold=doc["policy"]["route_threshold"],
        )
        manifest = tuple(doc["manifest"])
        layers = doc["layers"]
        model = TpisModel(
            scaler=scaler,
            layer1=_layer_from_dict(layers["layer1"]),
            layer2=_layer_from_dict(layers["layer2"]),
            step2_layer=_layer_from_dict(layers["step2"]),
            policy=policy,
            folds=doc["folds"],
            seed=doc["seed"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"corrupted archive section: {exc}") from exc
    if manifest != model.manifest:
        raise ArchiveError("archive manifest does not match the canonical feature order")
    return model


def save_model(model: TpisModel, path: str | Path) -> None:
    payload = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(payload)
        fh.write("\n")


def load_model(path: str | Path) -> TpisModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"archive is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
