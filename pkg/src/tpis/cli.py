"""Command-line surface for the full experiment lifecycle.

Subcommands: synth, train, eval, compare, workflow, diagnose, serve.
Exit codes: 0 success, 1 runtime failure (one diagnostic line on stderr),
2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_run_config
from .domain import FeatureSetId, Label, STEP1_FIELDS, STEP2_FIELDS, StepOneFeatures, StepTwoFeatures
from .errors import TpisError
from .metrics import ModelRecipe, compare_models, repeated_eval, single_recipes, table_recipes
from .learners import LearnerKind
from .pipeline import (
    PublishedStepOne,
    PublishedStepTwo,
    aggregate_accuracy,
    early_diagnose,
    final_diagnose,
    fit_tpis,
    run_workflow,
)
from .preprocess import prepare_records
from .service import TriageService, make_server
from .storage import load_model, read_dataset, save_model, write_dataset
from .synthgen import default_spec, load_spec, sample_cohort


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run-config file (flags override it)")


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    updates = {}
    for attr in ("seed", "folds", "epsilon", "runs", "train_per_class"):
        value = getattr(args, attr, None)
        if value is not None:
            updates[attr] = value
    threshold = getattr(args, "threshold", None)
    if threshold is not None:
        updates["route_threshold"] = threshold
    if updates:
        cfg = RunConfig(**{**_config_dict(cfg), **updates})
    return cfg


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "seed": cfg.seed,
        "folds": cfg.folds,
        "epsilon": cfg.epsilon,
        "route_threshold": cfg.route_threshold,
        "runs": cfg.runs,
        "train_per_class": cfg.train_per_class,
        "learners": dict(cfg.learners),
        "spec_path": cfg.spec_path,
        "model_path": cfg.model_path,
        "host": cfg.host,
        "port": cfg.port,
    }


def _complete_records(records, k: int = 5):
    """Impute if any record has a missing cell; otherwise pass through."""
    def has_missing(rec) -> bool:
        return (not rec.step1.complete) or rec.step2 is None or (not rec.step2.complete)

    if any(has_missing(r) for r in records):
        return prepare_records(records, k=k)
    return list(records)


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec) if args.spec else default_spec()
    records = sample_cohort(spec, n=args.n, seed=args.seed, missing=args.missing)
    write_dataset(records, args.out)
    n_tb = sum(1 for r in records if r.label is Label.TB)
    print(f"wrote {len(records)} records ({n_tb} TB, {len(records) - n_tb} P) to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    records = _complete_records(read_dataset(args.data))
    model = fit_tpis(records, cfg.tpis_config())
    save_model(model, args.out)
    print(
        f"trained on {len(records)} records "
        f"(layers {len(model.layer1)}/{len(model.layer2)}/{len(model.step2_layer)}, "
        f"seed {model.seed}); saved to {args.out}"
    )
    return 0


_RECIPE_KINDS = {
    "knn": LearnerKind.KNN,
    "lr": LearnerKind.LOGREG,
    "svm": LearnerKind.LINEAR_SVM,
    "dt": LearnerKind.DECISION_TREE,
    "rf": LearnerKind.RANDOM_FOREST,
    "adaboost": LearnerKind.ADABOOST,
    "gbt": LearnerKind.GBT,
}


def _parse_recipe(name: str) -> ModelRecipe:
    lowered = name.lower()
    if lowered in _RECIPE_KINDS:
        return single_recipes([_RECIPE_KINDS[lowered]])[0]
    if lowered in ("tpis-layer1", "tpis_layer1"):
        return ModelRecipe("TPIS step-1 layer 1", "tpis_layer1")
    if lowered in ("tpis-layer2", "tpis_layer2", "tpis-step1", "tpis"):
        return ModelRecipe("TPIS step-1 layer 2", "tpis_layer2")
    if lowered in ("tpis-step2", "tpis_step2", "tpis-full"):
        return ModelRecipe("TPIS step 2", "tpis_step2")
    raise TpisError(
        f"unknown recipe {name!r}; choose from {sorted(_RECIPE_KINDS)} "
        "or tpis-layer1 / tpis-layer2 / tpis-step2"
    )


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    records = _complete_records(read_dataset(args.data))
    recipe = _parse_recipe(args.recipe)
    fs = FeatureSetId(args.fs)
    report = repeated_eval(
        recipe,
        records,
        fs,
        runs=cfg.runs,
        train_per_class=cfg.train_per_class,
        seed=cfg.seed,
        config=cfg.tpis_config(),
    )
    print(f"{report.name} on {args.fs} over {report.runs} runs:")
    for metric in ("accuracy", "auc", "precision", "recall", "f_score"):
        stat = getattr(report, metric)
        print(f"  {metric:<9} {100 * stat.mean:6.2f} ± {100 * stat.half_width:.2f}")
    if args.roc_csv:
        from .metrics import roc_points, roc_points_csv

        curve, auc = roc_points(
            recipe, records, fs,
            train_per_class=cfg.train_per_class, seed=cfg.seed, config=cfg.tpis_config(),
        )
        Path(args.roc_csv).write_text(roc_points_csv(curve), encoding="utf-8")
        print(f"wrote ROC points of the first split (AUC {100 * auc:.2f}) to {args.roc_csv}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    records = _complete_records(read_dataset(args.data))
    fs = FeatureSetId(args.fs)
    table = compare_models(
        fs,
        table_recipes(fs, cfg.learners),
        records,
        runs=cfg.runs,
        train_per_class=cfg.train_per_class,
        seed=cfg.seed,
        config=cfg.tpis_config(),
    )
    print(f"feature set {fs.value}, {table.runs} runs, train {cfg.train_per_class} per class")
    print(table.to_text())
    if args.out_csv:
        Path(args.out_csv).write_text(table.to_csv(), encoding="utf-8")
        print(f"wrote {args.out_csv}")
    return 0


def cmd_workflow(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if args.threshold is not None:
        from .stacking import ConfidencePolicy
        from .pipeline import TpisModel

        model = TpisModel(
            scaler=model.scaler,
            layer1=model.layer1,
            layer2=model.layer2,
            step2_layer=model.step2_layer,
            policy=ConfidencePolicy(model.policy.epsilon, args.threshold),
            folds=model.folds,
            seed=model.seed,
        )
    records = _complete_records(read_dataset(args.data))
    outcomes, report = run_workflow(model, records)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("id,early_label,cs,routed,final_label,stage\n")
            for o in outcomes:
                early = o.early_label.value if o.early_label else "undetermined"
                fh.write(
                    f"{o.patient_id},{early},{o.cs!r},{int(o.routed)},"
                    f"{o.final_label.value},{o.stage.value}\n"
                )
        print(f"wrote per-patient outcomes to {args.out}")
    print(f"threshold {model.policy.route_threshold}, {report.n_labeled} labeled records")
    for cls in (Label.PNEUMONIA, Label.TB):
        stats = report.per_class[cls]
        print(
            f"  class {cls.value}: n={stats.n}  routed {100 * stats.routed_fraction:.1f}%  "
            f"step-1 errors {100 * stats.step1_error_fraction:.1f}%  "
            f"step-2 errors among routed {100 * stats.step2_error_fraction:.1f}%"
        )
        for cs_value, preds in stats.cs_buckets:
            parts = ", ".join(f"{k} {100 * v:.1f}%" for k, v in preds.items() if v > 0)
            print(f"    CS={cs_value:g}: {parts}")
    print(f"misdiagnosed {report.misdiagnosed} of {report.n_labeled}")
    print(f"aggregate accuracy {100 * report.aggregate_accuracy:.2f}%")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if args.input == "-":
        doc = json.load(sys.stdin)
    else:
        with open(args.input, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    step1_doc = doc.get("step1", doc)
    step1 = StepOneFeatures(**{f: float(step1_doc[f]) for f in STEP1_FIELDS})
    label, cs, meta2 = early_diagnose(model, step1)
    routed = label is None or cs < model.policy.route_threshold
    print(f"early: {label.value if label else 'undetermined'}  cs={cs:g}  routed={routed}")
    if "step2" in doc and (routed or args.force_step2):
        step2 = StepTwoFeatures(**{f: float(doc["step2"][f]) for f in STEP2_FIELDS})
        final = final_diagnose(model, meta2, step2)
        print(f"final: {final.value}")
    elif routed:
        print("routed: provide step-2 features (labs + CXR keywords) for the final decision")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    with open(args.tables, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    step1 = PublishedStepOne(
        routed_buckets={
            Label.PNEUMONIA: tuple(doc["step1"]["routed_buckets"]["P"]),
            Label.TB: tuple(doc["step1"]["routed_buckets"]["TB"]),
        },
        confident_wrong={
            Label.PNEUMONIA: doc["step1"]["confident_wrong"]["P"],
            Label.TB: doc["step1"]["confident_wrong"]["TB"],
        },
        class_sizes={
            Label.PNEUMONIA: doc["step1"]["class_sizes"]["P"],
            Label.TB: doc["step1"]["class_sizes"]["TB"],
        },
    )
    step2 = PublishedStepTwo(
        wrong_of_routed={
            Label.PNEUMONIA: doc["step2"]["wrong_of_routed"]["P"],
            Label.TB: doc["step2"]["wrong_of_routed"]["TB"],
        }
    )
    result = aggregate_accuracy(step1, step2)
    print(f"misdiagnosed {result.misdiagnosed} of {result.total}")
    print(f"aggregate accuracy {100 * result.accuracy:.2f}%")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    host = args.host or os.environ.get("TPIS_HOST") or cfg.host
    port = args.port if args.port is not None else int(os.environ.get("TPIS_PORT") or cfg.port)
    model_path = args.model or os.environ.get("TPIS_MODEL") or cfg.model_path
    model = load_model(model_path) if model_path else None
    service = TriageService(model)
    server = make_server(service, host, port)
    bound = server.server_address
    print(f"serving on http://{bound[0]}:{bound[1]} (model: {model_path or 'none'})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpis",
        description="Two-step decision support: early diagnosis, confidence "
        "routing, final diagnosis over labs and chest-X-ray keywords.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    p.add_argument("--n", type=int, default=199)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--spec", help="cohort spec JSON (defaults to the shipped parameters)")
    p.add_argument("--missing", action="store_true", help="mask cells at the published missing rates")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit the full two-step model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--threshold", type=float)
    _add_config_arg(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="repeated balanced-split evaluation of one recipe")
    p.add_argument("--data", required=True)
    p.add_argument("--recipe", required=True)
    p.add_argument("--fs", default="FS1", choices=[f.value for f in FeatureSetId])
    p.add_argument("--runs", type=int, dest="runs")
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--seed", type=int)
    p.add_argument("--roc-csv", help="write ROC points of the first split for external plotting")
    _add_config_arg(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="multi-model comparison table for a feature set")
    p.add_argument("--data", required=True)
    p.add_argument("--fs", default="FS1", choices=[f.value for f in FeatureSetId])
    p.add_argument("--runs", type=int, dest="runs")
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-csv")
    _add_config_arg(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("workflow", help="triage a cohort and print the routing report")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, help="override the model's routing threshold")
    p.add_argument("--out", help="write per-patient outcomes CSV")
    p.set_defaults(func=cmd_workflow)

    p = sub.add_parser("diagnose", help="diagnose a single record from a JSON document")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="JSON file with step1 (and optional step2) fields; '-' for stdin")
    p.add_argument("--force-step2", action="store_true", help="run step 2 even when step 1 is confident")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("aggregate", help="whole-cohort accuracy from published fraction tables")
    p.add_argument("--tables", required=True, help="JSON file with step1/step2 fraction tables")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--model")
    _add_config_arg(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TpisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
