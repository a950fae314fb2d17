"""Baseline feature extractors (PCA, kernel PCA), feature normalization and
an RBF-kernel SVM trained by sequential minimal optimization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidArgumentError
from .numeric import make_rng, sq_distances, sym_eigen


def _as_matrix(data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"expected a 2-D data matrix, got shape {data.shape}")
    return data


def _fix_signs(vecs):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


# --- PCA ---------------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (m, d), orthonormal rows
    variances: np.ndarray

    def project(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (x - self.mean) @ self.components.T


def pca_fit(data, m):
    """Top-``m`` principal directions of the rows of ``data``.

    When there are fewer samples than dimensions the eigenproblem is solved
    on the (n, n) Gram matrix and mapped back.
    """
    data = _as_matrix(data)
    n, d = data.shape
    if n < 2:
        raise InvalidArgumentError("PCA needs at least two samples")
    if not 1 <= m <= min(n - 1, d):
        raise InvalidArgumentError(f"m must be in [1, {min(n - 1, d)}], got {m}")
    mean = data.mean(0)
    xc = data - mean
    if d <= n:
        eig = sym_eigen(xc.T @ xc / n)
        comps = eig.eigenvectors[:, :m]
        var = eig.eigenvalues[:m]
    else:
        eig = sym_eigen(xc @ xc.T / n)
        lam = np.maximum(eig.eigenvalues[:m], 1e-300)
        comps = xc.T @ eig.eigenvectors[:, :m] / np.sqrt(lam * n)
        comps /= np.linalg.norm(comps, axis=0, keepdims=True)
        var = eig.eigenvalues[:m]
    return PcaModel(mean, _fix_signs(comps).T.copy(), var)


def pca_project(model, x):
    return model.project(x)


# --- kernel PCA --------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """``gaussian``: exp(-|x-y|^2 / 2 sigma^2); ``polynomial``: (x.y + offset)^degree;
    ``linear``: x.y."""

    kind: str = "gaussian"
    sigma: float = 1.0
    degree: int = 3
    offset: float = 1.0

    def __call__(self, a, b):
        a, b = np.atleast_2d(a), np.atleast_2d(b)
        if self.kind == "gaussian":
            return np.exp(-sq_distances(a, b) / (2.0 * self.sigma**2))
        if self.kind == "polynomial":
            return (a @ b.T + self.offset) ** self.degree
        if self.kind == "linear":
            return a @ b.T
        raise InvalidArgumentError(f"unknown kernel {self.kind!r}")


def center_gram(k):
    """K - 1_N K - K 1_N + 1_N K 1_N with 1_N the all-1/N matrix."""
    row = k.mean(0, keepdims=True)
    col = k.mean(1, keepdims=True)
    return k - row - col + k.mean()


@dataclass(frozen=True)
class KpcaModel:
    kernel: Kernel
    train: np.ndarray
    alphas: np.ndarray  # (n, m): column l is a_l scaled so that lambda_l N |a_l|^2 = 1
    eigenvalues: np.ndarray  # the lambda_l N of the centered Gram matrix
    train_col_means: np.ndarray
    train_grand_mean: float

    @property
    def dims(self):
        return self.alphas.shape[1]

    def project(self, x):
        kx = self.kernel(np.atleast_2d(x), self.train)
        kx = kx - self.train_col_means[None, :] - kx.mean(1, keepdims=True) + self.train_grand_mean
        out = kx @ self.alphas
        return out[0] if np.ndim(x) == 1 else out


def kpca_fit(data, kernel, m):
    """Kernel PCA; components whose eigenvalue is not above 1e-12 are dropped
    with a warning, so the model may have fewer than ``m`` dimensions."""
    data = _as_matrix(data)
    n = data.shape[0]
    if n < 2:
        raise InvalidArgumentError("kernel PCA needs at least two samples")
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    k = kernel(data, data)
    kc = center_gram(k)
    kc = 0.5 * (kc + kc.T)
    eig = sym_eigen(kc)
    lam = eig.eigenvalues[:m]
    keep = lam > 1e-12 * max(1.0, abs(eig.eigenvalues[0]))
    if keep.sum() < m:
        warnings.warn(f"kernel PCA: only {int(keep.sum())} of {m} components have positive eigenvalues")
    lam = lam[keep]
    vecs = _fix_signs(eig.eigenvectors[:, :m][:, keep])
    return KpcaModel(kernel, data, vecs / np.sqrt(lam), lam, k.mean(0), float(k.mean()))


def kpca_project(model, x):
    return model.project(x)


def gaussian_sigma_auto(data, n_pairs=1000, seed=0):
    """Mean Euclidean distance over (at most ``n_pairs``) sampled point pairs."""
    data = _as_matrix(data)
    n = data.shape[0]
    if n < 2:
        raise InvalidArgumentError("need at least two samples")
    total = n * (n - 1) // 2
    if total <= n_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = make_rng(seed)
        i = rng.integers(0, n, size=n_pairs)
        j = (i + rng.integers(1, n, size=n_pairs)) % n
    sigma = float(np.linalg.norm(data[i] - data[j], axis=1).mean())
    return max(sigma, 1e-6)


def zscore_fit_apply(train, *others):
    """Standardize columns with train statistics (population std).

    Zero-variance columns are only centered. Returns
    ``(train_z, [others_z...], means, stds)``.
    """
    train = _as_matrix(train)
    mean = train.mean(0)
    std = train.std(0)
    scale = np.where(std > 0, std, 1.0)
    out = [(_as_matrix(o) - mean) / scale for o in others]
    return (train - mean) / scale, out, mean, std


# --- SVM ---------------------------------------------------------------------


def rbf_kernel(a, b, gamma):
    """exp(-|u - v|^2 / gamma)."""
    return np.exp(-sq_distances(np.atleast_2d(a), np.atleast_2d(b)) / gamma)


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    gamma: float
    c: float
    iterations: int = 0
    converged: bool = True
    dual_history: list = field(default_factory=list)

    def decision(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.support_vectors.shape[0] == 0:
            return np.full(x.shape[0], self.bias)
        return rbf_kernel(x, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def svm_train(features, labels, c=1.0, gamma=1.0, tol=1e-3, max_iter=100_000, record=False):
    """Soft-margin RBF SVM by SMO with maximal-violating-pair selection.

    Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j K_ij,
    stopping when the KKT gap ``m(a) - M(a)`` drops below ``tol``.
    With ``record`` the dual objective after every update is kept in
    ``dual_history``.
    """
    x = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.shape[0] != y.size:
        raise DimensionError("features and labels differ in length")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidArgumentError("labels must be +1 or -1")
    if x.shape[0] < 2 or np.unique(y).size < 2:
        raise InvalidArgumentError("SVM training needs both classes present")
    n = y.size
    k = rbf_kernel(x, x, gamma)
    kdiag = np.diag(k).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - e
    history = []
    it = 0
    converged = False
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        if yg[i] - yg[j] < tol:
            converged = True
            break
        it += 1
        # move alpha_i by y_i t and alpha_j by -y_j t, keeping y'alpha fixed
        eta = max(kdiag[i] + kdiag[j] - 2.0 * k[i, j], 1e-12)
        t = (yg[i] - yg[j]) / eta
        t = min(t, c - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else c - alpha[j])
        di, dj = y[i] * t, -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)
        grad += y * (k[:, i] * (y[i] * di) + k[:, j] * (y[j] * dj))
        if record:
            # Q alpha = grad + e
            history.append(float(alpha.sum() - 0.5 * alpha @ (grad + 1.0)))
    yg = -y * grad
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        rho = float(np.mean(-yg[free]))
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        hi = np.max(yg[up]) if up.any() else 0.0
        lo = np.min(yg[low]) if low.any() else 0.0
        rho = float(-(hi + lo) / 2.0)
    sv = alpha > 1e-12
    return SvmModel(
        support_vectors=x[sv].copy(),
        dual_coef=(alpha * y)[sv],
        alphas=alpha,
        labels=y,
        bias=-rho,
        gamma=gamma,
        c=c,
        iterations=it,
        converged=converged,
        dual_history=history,
    )


def svm_predict(model, x):
    """+1/-1 labels; a zero decision value maps to +1."""
    dec = model.decision(x)
    out = np.where(dec >= 0, 1, -1)
    return int(out[0]) if np.ndim(x) == 1 else out
