import numpy as np
import pytest

from mdsfeat.datasets import synthetic_car_images
from mdsfeat.evaluation import (
    METHODS,
    PcaFeatures,
    binary_metrics,
    classify,
    cross_validate,
    make_method,
    stratified_folds,
)
from mdsfeat.errors import InvalidArgumentError
from mdsfeat.mds import IlmaOptions


def test_perfect_predictions():
    m = binary_metrics([1, -1, 1], [1, -1, 1])
    assert (m.precision, m.recall, m.accuracy) == (1.0, 1.0, 1.0)


def test_all_positive_predictor():
    y = np.array([1] * 110 + [-1] * 100)
    m = binary_metrics(y, np.ones(210))
    assert m.precision == pytest.approx(110 / 210)
    assert m.recall == 1.0


def test_no_positive_predictions_precision_zero():
    m = binary_metrics([1, -1], [-1, -1])
    assert m.precision == 0.0 and m.recall == 0.0 and m.accuracy == 0.5


def test_uiuc_fold_composition():
    labels = np.array([1] * 550 + [-1] * 500)
    folds = stratified_folds(labels, 5, seed=3)
    for f in range(5):
        assert np.sum((folds == f) & (labels == 1)) == 110
        assert np.sum((folds == f) & (labels == -1)) == 100
    assert np.array_equal(folds, stratified_folds(labels, 5, seed=3))


def test_metrics_recomputable_from_predictions():
    data = synthetic_car_images(n_pos=20, n_neg=15, seed=1)
    report = cross_validate(data, PcaFeatures(), [1, 3], folds=5, seed=0)
    assert len(report.rows) == 10
    for row in report.rows:
        idx, y, pred = report.predictions[(row["m"], row["fold"])]
        tp = np.sum((y == 1) & (pred == 1))
        tn = np.sum((y == -1) & (pred == -1))
        assert row["accuracy"] == pytest.approx((tp + tn) / len(y))
        assert np.array_equal(y, data.labels[idx])
    idx, feats = report.scatter[3]
    assert np.array_equal(idx, np.arange(len(data)))
    assert feats.shape == (len(data), 3)


def test_feature_length_range_rows():
    data = synthetic_car_images(n_pos=25, n_neg=25, seed=2)
    report = cross_validate(data, PcaFeatures(), range(1, 21), folds=5)
    assert len(report.rows) == 100
    assert sorted({r["m"] for r in report.rows}) == list(range(1, 21))


def test_classify_uses_gamma_equal_to_length(monkeypatch):
    import mdsfeat.evaluation as ev

    seen = {}
    real = ev.svm_train

    def spy(x, y, c=1.0, gamma=1.0, **kw):
        seen["gamma"] = gamma
        return real(x, y, c=c, gamma=gamma, **kw)

    monkeypatch.setattr(ev, "svm_train", spy)
    x = np.random.default_rng(0).normal(size=(10, 7))
    classify(x, np.array([1, -1] * 5), x, 7)
    assert seen["gamma"] == 7.0


@pytest.mark.parametrize("name", METHODS)
def test_every_method_runs(name):
    data = synthetic_car_images(n_pos=12, n_neg=10, seed=4)
    method = make_method(name, vocab_size=10, ilma=IlmaOptions(max_sweeps=3))
    report = cross_validate(data, method, [2], folds=2, seed=0)
    assert not report.failed()
    assert len(report.rows) == 2
    if name.endswith("-mds"):
        assert set(report.traces) == {(2, 0), (2, 1)}


def test_failing_fold_is_recorded():
    data = synthetic_car_images(n_pos=6, n_neg=6, seed=5)

    class Broken(PcaFeatures):
        name = "broken"

        def fold_features(self, data, train, test, dims):
            raise InvalidArgumentError("nope")

    report = cross_validate(data, Broken(), [1, 2], folds=2)
    assert len(report.failed()) == 4
    assert np.isnan(report.mean(1))


def test_unknown_method():
    with pytest.raises(InvalidArgumentError):
        make_method("sift-mds")
