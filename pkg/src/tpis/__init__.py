"""Two-step decision support for differentiating tuberculosis from pneumonia.

Step 1 diagnoses early from 18 low-cost features with a two-layer stacked
ensemble and scores its own confidence; low-confidence patients are routed
to step 2, where an ensemble over laboratory values, chest-X-ray report
keywords and the step-1 meta-features makes the final call.
"""

from .domain import (
    ConfusionMatrix,
    FeatureSetId,
    Label,
    PatientRecord,
    StepOneFeatures,
    StepTwoFeatures,
    select_features,
)
from .pipeline import TpisConfig, TpisModel, default_config, early_diagnose, final_diagnose, fit_tpis, run_workflow
from .stacking import ConfidencePolicy, VotePanel, confidence_score, vote_label
from .synthgen import CohortSpec, default_spec, sample_cohort

__version__ = "0.1.0"

__all__ = [
    "ConfidencePolicy",
    "ConfusionMatrix",
    "CohortSpec",
    "FeatureSetId",
    "Label",
    "PatientRecord",
    "StepOneFeatures",
    "StepTwoFeatures",
    "TpisConfig",
    "TpisModel",
    "VotePanel",
    "confidence_score",
    "default_config",
    "default_spec",
    "early_diagnose",
    "final_diagnose",
    "fit_tpis",
    "run_workflow",
    "sample_cohort",
    "select_features",
    "vote_label",
    "__version__",
]
