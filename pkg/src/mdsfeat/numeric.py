"""Dense linear-algebra primitives, k-means and seeded randomness.

Matrices are plain float64 numpy arrays. Randomness always flows through an
explicit ``numpy.random.Generator`` built by :func:`make_rng`, so that every
stochastic step in the package is reproducible from an integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, InvalidArgumentError, NumericalError

# Above this order the cyclic Jacobi sweep is too slow in practice and the
# LAPACK symmetric driver is used instead.
JACOBI_MAX_ORDER = 256


def make_rng(seed=0):
    """Return a PCG64-backed generator; the bit stream is platform independent."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_permutation(n, rng):
    if n < 1:
        raise InvalidArgumentError(f"permutation length must be >= 1, got {n}")
    return rng.permutation(n)


@dataclass(frozen=True)
class SymEigen:
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@njit(cache=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if np.sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def _check_symmetric(a, tol):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > tol * scale:
        raise DimensionError("matrix is not symmetric")
    return a


def jacobi_eigh(a, max_sweeps=100):
    """Cyclic Jacobi eigensolver.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``1e-12 * ||A||_F``. Returns ``(eigenvalues, eigenvectors)`` unsorted.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    n = work.shape[0]
    v = np.eye(n)
    tol = 1e-12 * np.linalg.norm(work)
    if n > 1 and tol > 0:
        done = _jacobi_sweeps(work, v, tol, max_sweeps)
        if done < 0:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(work).copy(), v


def sym_eigen(a, method="auto"):
    """Eigen-decompose a symmetric matrix.

    Parameters
    ----------
    a : (n, n) array
        Symmetric to 1e-10 (relative to its largest entry).
    method : {"auto", "jacobi", "lapack"}
        ``auto`` runs Jacobi up to order ``JACOBI_MAX_ORDER`` and LAPACK
        (``numpy.linalg.eigh``) beyond.

    Returns
    -------
    SymEigen
        Eigenvalues sorted descending with matching eigenvector columns.
    """
    a = _check_symmetric(a, 1e-10)
    a = 0.5 * (a + a.T)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_ORDER else "lapack"
    if method == "jacobi":
        w, v = jacobi_eigh(a)
    elif method == "lapack":
        w, v = np.linalg.eigh(a)
    else:
        raise InvalidArgumentError(f"unknown eigen method {method!r}")
    order = np.argsort(-w, kind="stable")
    return SymEigen(w[order], v[:, order])


def sym_sqrt(a, clip=1e-12, method="auto"):
    """Principal square root of a symmetric PSD matrix.

    Eigenvalues below ``clip`` (including small negative round-off) are set
    to zero. A clearly indefinite input raises :class:`NumericalError`.
    """
    eig = sym_eigen(a, method=method)
    w = eig.eigenvalues
    if w.size and w[-1] < -1e-8 * max(1.0, abs(w[0])):
        raise NumericalError(f"matrix is not positive semidefinite (min eigenvalue {w[-1]:.3g})")
    w = np.where(w < clip, 0.0, w)
    v = eig.eigenvectors
    return (v * np.sqrt(w)) @ v.T


def sq_distances(x, c):
    """Squared Euclidean distances between rows of ``x`` and rows of ``c``."""
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia_history: list

    @property
    def inertia(self):
        return self.inertia_history[-1]


def _kmeanspp(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = sq_distances(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # every point coincides with a centroid already: take the lowest unused index
            used = set(chosen)
            idx = next(i for i in range(n) if i not in used)
        else:
            # inverse-CDF draw; searchsorted picks the lowest index on ties
            cdf = np.cumsum(closest)
            idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            idx = min(idx, n - 1)
            while closest[idx] == 0.0:
                idx -= 1
        chosen.append(idx)
        closest = np.minimum(closest, sq_distances(points, points[idx : idx + 1])[:, 0])
    return points[chosen].copy()


def kmeans(points, k, rng, max_iter=100, tol=0.0):
    """Lloyd's k-means with k-means++ seeding.

    Returns a :class:`KMeansResult`; ``inertia_history`` holds the
    within-cluster sum of squares after every assignment step and is
    non-increasing. Empty clusters are re-seeded with the point farthest from
    its current centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1 or k > n:
        raise InvalidArgumentError(f"need 1 <= k <= n, got k={k}, n={n}")
    centroids = _kmeanspp(points, k, rng)
    history = []
    assign = None
    for _ in range(max_iter):
        d2 = sq_distances(points, centroids)
        new_assign = np.argmin(d2, axis=1)
        point_cost = d2[np.arange(n), new_assign]
        history.append(float(point_cost.sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        counts = np.bincount(assign, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            movable = np.where(counts[assign] > 1, point_cost, -1.0)
            far = int(np.argmax(movable))
            counts[assign[far]] -= 1
            assign[far] = empty
            counts[empty] = 1
            point_cost[far] = 0.0
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, points)
        centroids = sums / counts[:, None]
        if tol > 0 and len(history) > 1 and history[-2] - history[-1] <= tol * history[-2]:
            break
    d2 = sq_distances(points, centroids)
    assign = np.argmin(d2, axis=1)
    final = float(d2[np.arange(n), assign].sum())
    if final < history[-1]:
        history.append(final)
    return KMeansResult(centroids, assign, history)
