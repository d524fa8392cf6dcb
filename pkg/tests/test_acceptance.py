"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

The criteria are property-based plus exact reproduction of closed-form
arithmetic; headline accuracies from the private cohort are out of reach by
design and are not asserted anywhere.
"""

import itertools
import json
import time

import numpy as np
import pytest

from oracles import (
    auc_pair_oracle,
    confidence_oracle,
    metrics_oracle,
    vote_oracle,
)
from tpis.domain import ConfusionMatrix, FeatureSetId, Label, STEP1_FIELDS
from tpis.learners import LearnerKind, LearnerSpec, fit as fit_learner, logreg_loss_and_grad
from tpis.metrics import (
    _panel_readout,
    basic_metrics,
    compare_models,
    roc_auc,
    table_recipes,
)
from tpis.pipeline import (
    PublishedStepOne,
    PublishedStepTwo,
    TpisModel,
    aggregate_accuracy,
    default_config,
    _fit_tpis_artifacts,
    final_diagnose_batch,
    fit_tpis,
    run_workflow,
    step2_everywhere_accuracy,
)
from tpis.preprocess import SplitSpec, balanced_split
from tpis.metrics import _records_to_xy
from tpis.rng import derive_seed, make_rng
from tpis.stacking import ConfidencePolicy, VotePanel, confidence_score, vote_label
from tpis.storage import load_model, read_dataset, save_model, write_dataset
from tpis.synthgen import default_spec, sample_cohort


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def cohort199():
    return sample_cohort(default_spec(), 199, seed=7)


@pytest.fixture(scope="module")
def default_model(cohort199):
    return fit_tpis(cohort199, default_config(seed=7))


def test_criterion_1_confidence_score_oracle():
    """Exact agreement with a brute-force enumerator over the 5-voter grid."""
    start = time.perf_counter()
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    checked = 0
    for eps in (0.3, 0.4, 0.5):
        policy = ConfidencePolicy(epsilon=eps)
        for probs in itertools.product(grid, repeat=5):
            panel = VotePanel(probs)
            if confidence_score(panel, policy) != confidence_oracle(probs, eps):
                report("Eq-style confidence oracle", False, f"CS mismatch at {probs}, eps={eps}")
            got = vote_label(panel, policy)
            got_name = got.value if got is not None else "undetermined"
            if got_name != vote_oracle(probs, eps):
                report("Eq-style confidence oracle", False, f"vote mismatch at {probs}, eps={eps}")
            checked += 1
    elapsed = time.perf_counter() - start
    report(
        "confidence-score + vote oracle",
        checked == 3 * 5**5 and elapsed < 1.0,
        f"{checked} panels, {elapsed:.2f}s",
    )


def test_criterion_2_published_fraction_arithmetic():
    """96.48% aggregate accuracy and 7 misdiagnosed of 199, exactly."""
    start = time.perf_counter()
    step1 = PublishedStepOne(
        routed_buckets={Label.PNEUMONIA: (0.06, 0.05, 0.04), Label.TB: (0.01, 0.18, 0.02)},
        confident_wrong={Label.PNEUMONIA: 0.02, Label.TB: 0.01},
        class_sizes={Label.PNEUMONIA: 119, Label.TB: 80},
    )
    step2 = PublishedStepTwo(wrong_of_routed={Label.PNEUMONIA: 0.06, Label.TB: 0.17})
    result = aggregate_accuracy(step1, step2)
    elapsed = time.perf_counter() - start
    ok = (
        result.misdiagnosed == 7
        and result.total == 199
        and abs(100 * result.accuracy - 96.48) <= 0.01
        and elapsed < 1.0
    )
    report(
        "published-fraction arithmetic",
        ok,
        f"{result.misdiagnosed}/199 wrong, {100 * result.accuracy:.4f}%, {elapsed:.2f}s",
    )


def test_criterion_3_metrics_and_auc_oracles():
    """Exhaustive confusion matrices to N=20; AUC vs pair statistic, 1e-9."""
    start = time.perf_counter()
    count = 0
    for n in range(1, 21):
        for tp in range(n + 1):
            for fp in range(n - tp + 1):
                for fn in range(n - tp - fp + 1):
                    tn = n - tp - fp - fn
                    bm = basic_metrics(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))
                    acc, prec, rec, f = metrics_oracle(tp, fp, fn, tn)
                    if (
                        abs(bm.accuracy - float(acc)) > 1e-12
                        or abs(bm.precision - float(prec)) > 1e-12
                        or abs(bm.recall - float(rec)) > 1e-12
                        or abs(bm.f_score - float(f)) > 1e-12
                    ):
                        report("metrics oracle", False, f"mismatch at {(tp, fp, fn, tn)}")
                    count += 1
    rng = make_rng(99)
    max_gap = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 31))
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 0, 1
        scores = np.round(rng.random(n), 2)
        _, auc = roc_auc(scores, [Label.TB if l else Label.PNEUMONIA for l in labels])
        max_gap = max(max_gap, abs(auc - auc_pair_oracle(scores, labels)))
    elapsed = time.perf_counter() - start
    report(
        "metrics + AUC oracles",
        max_gap < 1e-9 and elapsed < 10.0,
        f"{count} matrices, AUC gap {max_gap:.2e}, {elapsed:.1f}s",
    )


def test_criterion_4_logreg_gradient_check():
    """Analytic gradient vs central differences on 100 random instances."""
    start = time.perf_counter()
    rng = make_rng(31)
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(3, 15)), int(rng.integers(1, 6))
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
            worst = max(worst, abs(fd - gw[j]) / max(1.0, abs(fd)))
        hi, _, _ = logreg_loss_and_grad(w, b + h, X, y, lam)
        lo, _, _ = logreg_loss_and_grad(w, b - h, X, y, lam)
        worst = max(worst, abs((hi - lo) / (2 * h) - gb))
    elapsed = time.perf_counter() - start
    report(
        "logistic-loss gradient check",
        worst < 1e-5 and elapsed < 5.0,
        f"worst relative error {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_5_structure_ordering():
    """Over 30 fresh seeded cohorts: the step-1 stack keeps within 1 point of
    every base classifier, and the full pipeline within 0.5 of step 1."""
    start = time.perf_counter()
    spec = default_spec()
    master = 7
    singles = {
        "knn": LearnerKind.KNN,
        "lr": LearnerKind.LOGREG,
        "svm": LearnerKind.LINEAR_SVM,
        "dt": LearnerKind.DECISION_TREE,
        "rf": LearnerKind.RANDOM_FOREST,
    }
    accs: dict[str, list[float]] = {k: [] for k in (*singles, "layer2", "full")}
    for r in range(30):
        cohort = sample_cohort(spec, 199, seed=derive_seed(master, "cohort", r))
        run_seed = derive_seed(master, "run", r)
        train, test = balanced_split(cohort, SplitSpec(60, run_seed))
        config = default_config(seed=run_seed)
        model, _ = _fit_tpis_artifacts(train, config)
        X1_test, X2_test, y_test = _records_to_xy(test)
        X1_train, _, y_train = _records_to_xy(train)
        X1s_train = model.scale_step1(X1_train)
        X1s_test = model.scale_step1(X1_test)
        for key, kind in singles.items():
            single = fit_learner(
                LearnerSpec(kind, seed=derive_seed(run_seed, "single", key)), X1s_train, y_train
            )
            p = np.asarray(single.predict_proba(X1s_test))
            accs[key].append(float(((p >= 0.5).astype(int) == y_test).mean()))
        meta1 = model.layer1.panel_matrix(X1s_test)
        meta2 = model.layer2.panel_matrix(meta1)
        _, stack_labels = _panel_readout(meta2, config.policy.epsilon)
        accs["layer2"].append(float((stack_labels == y_test).mean()))
        full_labels, _ = final_diagnose_batch(model, meta2, X2_test)
        accs["full"].append(float((full_labels == y_test).mean()))
    means = {k: 100 * float(np.mean(v)) for k, v in accs.items()}
    best_single = max(means[k] for k in singles)
    elapsed = time.perf_counter() - start
    ok_a = means["layer2"] >= best_single - 1.0
    ok_b = means["full"] >= means["layer2"] - 0.5
    detail = (
        f"stack {means['layer2']:.2f} vs best single {best_single:.2f}; "
        f"full {means['full']:.2f}; {elapsed:.0f}s"
    )
    report("structure ordering on synthetic cohorts", ok_a and ok_b and elapsed < 300.0, detail)


def _with_threshold(model: TpisModel, threshold: float) -> TpisModel:
    return TpisModel(
        scaler=model.scaler,
        layer1=model.layer1,
        layer2=model.layer2,
        step2_layer=model.step2_layer,
        policy=ConfidencePolicy(model.policy.epsilon, threshold),
        folds=model.folds,
        seed=model.seed,
    )


def test_criterion_6_routing_monotonicity(default_model, cohort199):
    """Routed fraction is non-decreasing in the threshold; threshold 1.01
    reproduces the everything-to-step-2 accuracy exactly."""
    fractions = []
    accuracy_101 = None
    for threshold in (0.0, 0.25, 0.51, 0.75, 1.01):
        outcomes, rep = run_workflow(_with_threshold(default_model, threshold), cohort199)
        fractions.append(sum(o.routed for o in outcomes) / len(outcomes))
        if threshold == 1.01:
            accuracy_101 = rep.aggregate_accuracy
    monotone = all(a <= b + 1e-12 for a, b in zip(fractions, fractions[1:]))
    everywhere = step2_everywhere_accuracy(default_model, cohort199)
    ok = monotone and accuracy_101 == everywhere
    report(
        "routing monotonicity",
        ok,
        f"fractions {['%.3f' % f for f in fractions]}, step2-everywhere {everywhere:.4f}",
    )


def test_criterion_7_determinism(cohort199, tmp_path):
    """Identical config and seeds give byte-identical archives and identical
    comparison tables."""
    config = default_config(seed=41)
    a_path, b_path = tmp_path / "a.json", tmp_path / "b.json"
    save_model(fit_tpis(cohort199, config), a_path)
    save_model(fit_tpis(cohort199, config), b_path)
    archives_equal = a_path.read_bytes() == b_path.read_bytes()

    fs = FeatureSetId.FS1
    kwargs = dict(runs=2, train_per_class=60, seed=17, config=default_config(seed=17))
    table_a = compare_models(fs, table_recipes(fs), cohort199, **kwargs)
    table_b = compare_models(fs, table_recipes(fs), cohort199, **kwargs)
    tables_equal = table_a.to_csv() == table_b.to_csv()
    report(
        "determinism of archives and tables",
        archives_equal and tables_equal,
        f"archive bytes equal: {archives_equal}, tables equal: {tables_equal}",
    )


def test_criterion_8_round_trips(default_model, cohort199, tmp_path):
    """Dataset CSV and model archive round-trips are lossless."""
    csv_path = tmp_path / "cohort.csv"
    masked = sample_cohort(default_spec(), 199, seed=23, missing=True)
    write_dataset(masked, csv_path)
    dataset_ok = read_dataset(csv_path) == masked

    model_path = tmp_path / "model.json"
    save_model(default_model, model_path)
    clone = load_model(model_path)
    from tpis.pipeline import early_diagnose

    rng = make_rng(51)
    prediction_ok = True
    for _ in range(100):
        x1 = np.concatenate(
            [[rng.uniform(0, 130)], rng.integers(0, 2, len(STEP1_FIELDS) - 1)]
        ).astype(float)
        a = early_diagnose(default_model, x1)
        b = early_diagnose(clone, x1)
        if a != b:
            prediction_ok = False
            break
    report(
        "dataset and model round-trips",
        dataset_ok and prediction_ok,
        f"dataset equal: {dataset_ok}, predictions identical on 100 vectors: {prediction_ok}",
    )
