import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdsfeat.baselines import (
    Kernel,
    center_gram,
    gaussian_sigma_auto,
    kpca_fit,
    pca_fit,
    svm_predict,
    svm_train,
    zscore_fit_apply,
)
from mdsfeat.errors import InvalidArgumentError


def test_pca_single_axis():
    x = np.column_stack([np.linspace(-3, 3, 11), np.zeros(11)])
    model = pca_fit(x, 1)
    np.testing.assert_allclose(np.abs(model.components[0]), [1.0, 0.0], atol=1e-12)


def test_pca_mean_projects_to_zero(rng):
    x = rng.normal(size=(15, 4)) + 7
    model = pca_fit(x, 3)
    np.testing.assert_allclose(model.project(x.mean(0)), 0.0, atol=1e-12)


def test_pca_full_rank_is_lossless(rng):
    x = rng.normal(size=(20, 5))
    model = pca_fit(x, 5)
    back = model.project(x) @ model.components + model.mean
    np.testing.assert_allclose(back, x, atol=1e-8)


@given(seed=st.integers(0, 2**31), n=st.integers(3, 30), d=st.integers(1, 40))
def test_pca_translation_invariant_and_orthonormal(seed, n, d):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, d))
    m = min(n - 1, d)
    a = pca_fit(x, m)
    b = pca_fit(x + r.normal(size=d) * 100, m)
    np.testing.assert_allclose(a.components @ a.components.T, np.eye(m), atol=1e-8)
    # projections agree wherever the variance ordering is unambiguous
    gaps = np.abs(np.diff(np.append(a.variances, 0.0)))
    ok = np.flatnonzero((gaps > 1e-6 * a.variances[0]) & np.append(True, gaps[:-1] > 1e-6 * a.variances[0]))
    np.testing.assert_allclose(a.project(x)[:, ok], b.project(x + (b.mean - a.mean))[:, ok], atol=1e-6 * (1 + np.abs(x).max()))


def test_pca_gram_route_matches_covariance_route(rng):
    x = rng.normal(size=(8, 30))
    model = pca_fit(x, 4)
    xc = x - x.mean(0)
    w, v = np.linalg.eigh(xc.T @ xc / 8)
    top = v[:, ::-1][:, :4]
    np.testing.assert_allclose(np.abs(model.components @ top), np.eye(4), atol=1e-8)
    np.testing.assert_allclose(model.variances, w[::-1][:4], rtol=1e-8)


def test_pca_rejects_bad_m(rng):
    with pytest.raises(InvalidArgumentError):
        pca_fit(rng.normal(size=(5, 3)), 4)


def test_constant_kernel_centers_to_zero():
    np.testing.assert_allclose(center_gram(np.full((6, 6), 3.7)), 0.0, atol=1e-14)


@given(seed=st.integers(0, 2**31), n=st.integers(2, 30))
def test_centered_gram_sums_vanish(seed, n):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    kc = center_gram(Kernel("gaussian", sigma=1.3)(x, x))
    assert np.abs(kc.sum(0)).max() < 1e-8 * n
    assert np.abs(kc.sum(1)).max() < 1e-8 * n


def test_linear_kpca_matches_pca(rng):
    x = rng.normal(size=(10, 3)) * [3.0, 2.0, 0.5]
    x -= x.mean(0)
    p = pca_fit(x, 2).project(x)
    k = kpca_fit(x, Kernel("linear"), 2).project(x)
    for c in range(2):
        sign = np.sign(p[:, c] @ k[:, c])
        np.testing.assert_allclose(sign * k[:, c], p[:, c], atol=1e-8)


def test_gaussian_kpca_training_point_projection(rng):
    x = rng.normal(size=(12, 4))
    model = kpca_fit(x, Kernel("gaussian", sigma=2.0), 3)
    kc = center_gram(Kernel("gaussian", sigma=2.0)(x, x))
    np.testing.assert_allclose(model.project(x), kc @ model.alphas, atol=1e-8)
    np.testing.assert_allclose(model.project(x[4]), (kc @ model.alphas)[4], atol=1e-8)


def test_kpca_rank_deficiency_warns():
    x = np.zeros((5, 2))
    x[:, 0] = np.arange(5)
    with pytest.warns(UserWarning):
        model = kpca_fit(x, Kernel("linear"), 3)
    assert model.dims == 1


def test_polynomial_kernel():
    a = np.array([[1.0, 2.0]])
    b = np.array([[3.0, -1.0]])
    assert Kernel("polynomial")(a, b)[0, 0] == pytest.approx((1 * 3 - 2 + 1) ** 3)


def test_sigma_rule():
    assert gaussian_sigma_auto(np.array([[0.0, 0.0], [4.0, 0.0]])) == pytest.approx(4.0)
    x = np.random.default_rng(0).normal(size=(100, 5))
    assert gaussian_sigma_auto(x) == gaussian_sigma_auto(x.copy())
    assert gaussian_sigma_auto(2 * x) == pytest.approx(2 * gaussian_sigma_auto(x), rel=1e-12)
    assert gaussian_sigma_auto(np.zeros((3, 2))) == 1e-6


def test_zscore_examples():
    z, (t,), mean, std = zscore_fit_apply(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), np.array([[2.0, 9.0]]))
    np.testing.assert_allclose(z[:, 0], [-1.2247449, 0.0, 1.2247449], atol=1e-7)
    np.testing.assert_array_equal(z[:, 1], 0.0)
    assert t[0, 0] == 0.0
    assert t[0, 1] == 4.0


def test_svm_two_points():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    model = svm_train(x, [1, -1], gamma=2.0)
    assert list(svm_predict(model, x)) == [1, -1]
    assert model.decision(np.array([[1.0, 0.0]]))[0] == pytest.approx(0.0, abs=1e-9)


def test_svm_xor():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1, 1, -1, -1])
    model = svm_train(x, y, c=10.0, gamma=0.5)
    assert np.all(np.sign(model.decision(x)) == y)


@given(seed=st.integers(0, 2**31), n=st.integers(4, 40), c=st.floats(0.1, 10))
def test_svm_dual_monotone_and_free_sv_margins(seed, n, c):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, 2))
    y = np.where(x[:, 0] + 0.5 * r.normal(size=n) > 0, 1, -1)
    y[:2] = [1, -1]
    model = svm_train(x, y, c=c, gamma=2.0, record=True)
    hist = np.array(model.dual_history)
    assert model.converged
    assert np.all(np.diff(hist) >= -1e-10 * max(1.0, np.abs(hist).max()))
    free = (model.alphas > 1e-8) & (model.alphas < c - 1e-8)
    if free.any():
        margins = y[free] * model.decision(x[free])
        np.testing.assert_allclose(margins, 1.0, atol=2e-3)
    assert np.all(svm_predict(model, x[free]) == y[free])


def test_svm_validation():
    with pytest.raises(InvalidArgumentError):
        svm_train(np.zeros((3, 2)), [1, 1, 1])
    with pytest.raises(InvalidArgumentError):
        svm_train(np.zeros((2, 2)), [1, 0])


def test_svm_zero_decision_is_positive():
    model = svm_train(np.array([[0.0], [1.0]]), [1, -1])
    model.bias = 0.0
    model.dual_coef = np.zeros_like(model.dual_coef)
    assert svm_predict(model, np.array([0.5])) == 1
