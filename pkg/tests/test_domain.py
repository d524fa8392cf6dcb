import math

import numpy as np
import pytest

from tpis.domain import (
    BINARY_FIELDS,
    ConfusionMatrix,
    FeatureSetId,
    Label,
    NUMERIC_FIELDS,
    PatientRecord,
    STEP1_FIELDS,
    STEP2_FIELDS,
    StepOneFeatures,
    StepTwoFeatures,
    feature_names,
    select_features,
)
from tpis.errors import MissingMetaFeatures, ShapeError


def make_record(with_step2=True):
    step1 = StepOneFeatures(age=67, gender=1, **{f: 0.0 for f in STEP1_FIELDS[2:]})
    step2 = StepTwoFeatures(**{f: 1.0 for f in STEP2_FIELDS}) if with_step2 else None
    return PatientRecord(id="p1", step1=step1, step2=step2, label=Label.TB)


def test_exactly_two_classes():
    assert {l.value for l in Label} == {"TB", "P"}


def test_field_counts():
    assert len(STEP1_FIELDS) == 18
    assert len(STEP2_FIELDS) == 10
    assert len(NUMERIC_FIELDS) == 9
    assert len(BINARY_FIELDS) == 19


def test_select_fs1_is_18_elements():
    vec = select_features(make_record(), FeatureSetId.FS1)
    assert vec.shape == (18,)
    assert vec[0] == 67


def test_select_fs4_is_fs2_plus_meta():
    meta2 = [0.1, 0.2, 0.3, 0.4, 0.5]
    vec = select_features(make_record(), FeatureSetId.FS4, meta2)
    assert vec.shape == (15,)
    assert list(vec[-5:]) == meta2


def test_select_fs5_is_28_elements():
    assert select_features(make_record(), FeatureSetId.FS5).shape == (28,)


@pytest.mark.parametrize("fs", [FeatureSetId.FS3, FeatureSetId.FS4])
def test_meta_feature_sets_require_meta2(fs):
    with pytest.raises(MissingMetaFeatures):
        select_features(make_record(), fs)


def test_missing_values_preserved():
    rec = PatientRecord(id="x", step1=StepOneFeatures(age=40), step2=None)
    vec = select_features(rec, FeatureSetId.FS5)
    assert vec[0] == 40
    assert np.isnan(vec[1:]).all()


def test_select_features_deterministic():
    rec = make_record()
    a = select_features(rec, FeatureSetId.FS5)
    b = select_features(rec, FeatureSetId.FS5)
    assert np.array_equal(a, b, equal_nan=True)


@pytest.mark.parametrize("n_meta", [2, 5, 9])
def test_fs4_length_identity(n_meta):
    rec = make_record()
    meta = [0.5] * n_meta
    fs4 = select_features(rec, FeatureSetId.FS4, meta)
    fs2 = select_features(rec, FeatureSetId.FS2)
    assert len(fs4) == len(fs2) + n_meta


def test_feature_name_set_unions():
    fs2 = set(feature_names(FeatureSetId.FS2))
    fs3 = set(feature_names(FeatureSetId.FS3))
    assert set(feature_names(FeatureSetId.FS4)) == fs2 | fs3
    fs1 = set(feature_names(FeatureSetId.FS1))
    assert set(feature_names(FeatureSetId.FS5)) == fs1 | fs2


def test_age_validation():
    with pytest.raises(ValueError):
        StepOneFeatures(age=200)
    with pytest.raises(ValueError):
        StepOneFeatures(age=-1)
    assert math.isnan(StepOneFeatures().age)


def test_binary_validation():
    with pytest.raises(ValueError):
        StepOneFeatures(age=40, cough=0.5)
    with pytest.raises(ValueError):
        StepTwoFeatures(white_spots_cxr=2)


def test_lab_values_must_be_finite():
    with pytest.raises(ValueError):
        StepTwoFeatures(wbc=math.inf)


def test_vector_roundtrip():
    step1 = StepOneFeatures(age=55, gender=1, cough=1, **{f: 0.0 for f in STEP1_FIELDS[3:]})
    again = StepOneFeatures.from_vector(step1.to_vector())
    assert again == step1
    assert step1.complete
    assert not StepOneFeatures(age=55).complete


def test_from_vector_shape_checked():
    with pytest.raises(ShapeError):
        StepOneFeatures.from_vector(np.zeros(17))
    with pytest.raises(ShapeError):
        StepTwoFeatures.from_vector(np.zeros(11))


def test_confusion_matrix_counts():
    cm = ConfusionMatrix(tp=3, fp=1, fn=2, tn=4)
    assert cm.n == 10
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1, fp=0, fn=0, tn=0)
