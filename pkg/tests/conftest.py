import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tpis.domain import STEP1_FIELDS, STEP2_FIELDS
from tpis.learners import LogRegModel
from tpis.pipeline import TpisModel, default_config
from tpis.preprocess import ScalerState
from tpis.stacking import ConfidencePolicy, EnsembleLayer
from tpis.synthgen import default_spec, sample_cohort

# cheap hyperparameters so pipeline-level tests stay fast; the acceptance
# suite exercises the real defaults
FAST_OVERRIDES = {
    "random_forest": {"n_trees": 8},
    "logreg": {"iterations": 150},
    "linear_svm": {"epochs": 25},
    "adaboost": {"rounds": 15},
    "gbt": {"rounds": 15},
    "knn": {"k": 5},
}


def fast_config(seed=0, epsilon=0.4, route_threshold=0.51, folds=3):
    return default_config(
        seed=seed,
        epsilon=epsilon,
        route_threshold=route_threshold,
        folds=folds,
        learner_overrides=FAST_OVERRIDES,
    )


@pytest.fixture(scope="session")
def cohort_small():
    return sample_cohort(default_spec(), 80, seed=11)


@pytest.fixture(scope="session")
def cohort_199():
    return sample_cohort(default_spec(), 199, seed=7)


@pytest.fixture(scope="session")
def fitted_model(cohort_small):
    from tpis.pipeline import fit_tpis

    return fit_tpis(cohort_small, fast_config(seed=3))


def constant_logreg(n_features: int, bias: float) -> LogRegModel:
    """A learner whose probability is sigmoid(bias) for every input."""
    return LogRegModel(np.zeros(n_features), bias, {"learning_rate": 0.1, "iterations": 1, "l2": 0.0}, 0)


def handmade_model(
    layer2_biases=(8.0, 8.0, 8.0, 8.0, 8.0),
    step2_biases=(8.0, 8.0, 8.0, -8.0, -8.0),
    epsilon=0.4,
    route_threshold=0.51,
) -> TpisModel:
    """A fully deterministic model built from constant-output members; used
    to pin exact routing and voting behavior without training."""
    n1, n2 = len(STEP1_FIELDS), len(STEP2_FIELDS)
    scaler = ScalerState((0.0,) * (n1 + n2), (1.0,) * (n1 + n2))
    layer1 = EnsembleLayer([constant_logreg(n1, 0.5) for _ in range(5)], folds=2)
    layer2 = EnsembleLayer([constant_logreg(5, b) for b in layer2_biases], folds=2)
    step2_layer = EnsembleLayer([constant_logreg(n2 + 5, b) for b in step2_biases], folds=2)
    return TpisModel(
        scaler=scaler,
        layer1=layer1,
        layer2=layer2,
        step2_layer=step2_layer,
        policy=ConfidencePolicy(epsilon=epsilon, route_threshold=route_threshold),
        folds=2,
        seed=0,
    )
