"""Pairwise distances: image Euclidean, IMED and its standardizing
transform, geodesic distances on point clouds, and SPM similarity to
distance conversions.

Gray images are 2-D float arrays (row-major, intensities in [0, 1]).

IMED uses the weight ``g = f(||p - p'||)`` with the normalized Gaussian
``f(t) = exp(-t^2 / 2 sigma^2) / (2 pi sigma^2)``. Because that weight
factors over rows and columns, the (HW x HW) matrix G is the Kronecker
product ``c * Gr (x) Gc`` of two small Gaussian matrices, so both the
quadratic form and the exact square root are computed from the factors.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree

from .errors import (
    ConnectivityError,
    DimensionError,
    InvalidArgumentError,
    MeasurementError,
    NumericalError,
)
from .numeric import sym_sqrt

EXPLICIT_MAX_PIXELS = 4096


def as_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"gray image must be 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise DimensionError("image has non-finite intensities")
    return img


def _same_size(a, b):
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"images differ in size: {a.shape} vs {b.shape}")
    return a, b


def euclidean_distance(a, b):
    a, b = _same_size(a, b)
    return float(np.sqrt(((a - b) ** 2).sum()))


@dataclass(frozen=True)
class ImedParams:
    """``normalization`` is ``"gaussian"`` (plain normalized f) or
    ``"doubly-stochastic"`` (G rescaled symmetrically so every row sums to 1,
    which makes the transform preserve constant images)."""

    sigma: float = 1.0
    normalization: str = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be > 0")
        if self.normalization not in ("gaussian", "doubly-stochastic"):
            raise InvalidArgumentError(f"unknown normalization {self.normalization!r}")


def _sinkhorn_symmetric(g, iters=1000, tol=1e-14):
    s = np.ones(g.shape[0])
    for _ in range(iters):
        s_new = np.sqrt(s / (g @ s))
        if np.max(np.abs(s_new - s)) < tol:
            s = s_new
            break
        s = s_new
    return s[:, None] * g * s[None, :]


@lru_cache(maxsize=32)
def _factors(height, width, sigma, normalization):
    """(scale, Gr, Gc) with G = scale * kron(Gr, Gc)."""
    r = np.arange(height, dtype=np.float64)
    c = np.arange(width, dtype=np.float64)
    gr = np.exp(-((r[:, None] - r[None, :]) ** 2) / (2 * sigma**2))
    gc = np.exp(-((c[:, None] - c[None, :]) ** 2) / (2 * sigma**2))
    scale = 1.0 / (2 * math.pi * sigma**2)
    if normalization == "doubly-stochastic":
        gr, gc, scale = _sinkhorn_symmetric(gr), _sinkhorn_symmetric(gc), 1.0
    gr.setflags(write=False)
    gc.setflags(write=False)
    return scale, gr, gc


@lru_cache(maxsize=32)
def _sqrt_factors(height, width, sigma, normalization):
    scale, gr, gc = _factors(height, width, sigma, normalization)
    sr, sc = sym_sqrt(gr), sym_sqrt(gc)
    sr.setflags(write=False)
    sc.setflags(write=False)
    return math.sqrt(scale), sr, sc


def imed_matrix(height, width, params=ImedParams()):
    """The explicit (HW x HW) IMED weight matrix G, row-major pixel order."""
    if height * width > EXPLICIT_MAX_PIXELS:
        raise InvalidArgumentError(f"explicit G limited to {EXPLICIT_MAX_PIXELS} pixels")
    scale, gr, gc = _factors(height, width, params.sigma, params.normalization)
    return scale * np.kron(gr, gc)


def imed(a, b, params=ImedParams()):
    """IMage Euclidean Distance: sqrt of the G-weighted quadratic form of a - b."""
    a, b = _same_size(a, b)
    scale, gr, gc = _factors(*a.shape, params.sigma, params.normalization)
    diff = a - b
    val = scale * float((diff * (gr @ diff @ gc)).sum())
    if val < 0:
        if val < -1e-10 * max(1.0, float((diff * diff).sum())):
            raise NumericalError("IMED weight matrix is not positive semidefinite")
        val = 0.0
    return math.sqrt(val)


def standardizing_transform(img, params=ImedParams(), method="exact"):
    """Blur ``img`` by G^(1/2) so Euclidean distance afterwards equals IMED.

    method
        ``"exact"``: eigen square roots of the row and column factors.
        ``"explicit"``: square root of the full G (up to 4096 pixels).
        ``"convolve"``: approximate; separable Gaussian of width
        sigma/sqrt(2) truncated at 3 sigma, zero padded. Only meaningful for
        the ``"gaussian"`` normalization.
    """
    img = as_image(img)
    h, w = img.shape
    if method == "exact":
        s, sr, sc = _sqrt_factors(h, w, params.sigma, params.normalization)
        return s * (sr @ img @ sc)
    if method == "explicit":
        root = sym_sqrt(imed_matrix(h, w, params))
        return (root @ img.ravel()).reshape(h, w)
    if method == "convolve":
        s = params.sigma / math.sqrt(2.0)
        radius = max(1, int(math.ceil(3 * params.sigma)))
        t = np.arange(-radius, radius + 1, dtype=np.float64)
        k = np.exp(-(t**2) / (2 * s**2))
        k /= k.sum()
        out = ndimage.correlate1d(img, k, axis=0, mode="constant")
        return ndimage.correlate1d(out, k, axis=1, mode="constant")
    raise InvalidArgumentError(f"unknown transform method {method!r}")


def transform_batch(images, params=ImedParams()):
    """Apply the exact transform to a stack of equally sized images (n, h, w)."""
    stack = np.asarray(images, dtype=np.float64)
    if stack.ndim != 3:
        raise DimensionError("expected a stack of images with shape (n, h, w)")
    s, sr, sc = _sqrt_factors(stack.shape[1], stack.shape[2], params.sigma, params.normalization)
    return s * np.einsum("ij,njk,kl->nil", sr, stack, sc, optimize=True)


def euclidean_matrix(rows, cols=None):
    """Euclidean distances between rows of two 2-D arrays (or within one)."""
    a = np.asarray(rows, dtype=np.float64)
    b = a if cols is None else np.asarray(cols, dtype=np.float64)
    d2 = (a * a).sum(1)[:, None] - 2.0 * a @ b.T + (b * b).sum(1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    out = np.sqrt(d2)
    if cols is None:
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 0.0)
    return out


def imed_matrix_batch(images, others=None, params=ImedParams()):
    """IMED between every pair of images, via the transform and Euclidean distance."""
    ta = transform_batch(images, params).reshape(len(images), -1)
    tb = None if others is None else transform_batch(others, params).reshape(len(others), -1)
    return euclidean_matrix(ta, tb)


def geodesic_distance_matrix(points, k=8):
    """Shortest-path distances over the symmetric k-nearest-neighbour graph.

    An edge joins i and j when either is among the other's k nearest
    neighbours; edge weights are Euclidean lengths.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or not np.all(np.isfinite(pts)):
        raise DimensionError("point cloud must be a finite (n, d) array")
    n = pts.shape[0]
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    if n == 1:
        return np.zeros((1, 1))
    kk = min(k, n - 1)
    dist, idx = cKDTree(pts).query(pts, kk + 1)
    rows = np.repeat(np.arange(n), kk)
    cols = idx[:, 1:].ravel()
    w = dist[:, 1:].ravel()
    # coincident neighbours would read as missing edges in a sparse graph
    w = np.where(w > 0, w, np.finfo(float).tiny)
    graph = csr_matrix((w, (rows, cols)), shape=(n, n))
    graph = graph.maximum(graph.T)
    ncomp, labels = connected_components(graph, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        small = int(np.argmin(sizes))
        members = np.flatnonzero(labels == small)
        raise ConnectivityError(
            f"k={k} neighbour graph has {ncomp} components; smallest has "
            f"{members.size} point(s): {members[:20].tolist()}",
            component=members,
        )
    out = shortest_path(graph, method="D", directed=False)
    out[out < 1e-300] = 0.0
    return 0.5 * (out + out.T)


def _check_similarity(k):
    k = np.asarray(k, dtype=np.float64)
    if np.any(~np.isfinite(k)) or np.any(k < -1e-12) or np.any(k > 1 + 1e-12):
        raise InvalidArgumentError("similarity must lie in [0, 1]")
    return np.clip(k, 0.0, 1.0)


def spm1_distance(similarity):
    k = _check_similarity(similarity)
    out = 1.0 - k
    return float(out) if out.ndim == 0 else out


def spm2_distance(similarity, epsilon=0.001):
    if not 0 < epsilon < 1:
        raise InvalidArgumentError("epsilon must lie in (0, 1)")
    k = _check_similarity(similarity)
    out = -np.log((1.0 - epsilon) * k + epsilon)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def build_distance_matrix(items, measure):
    """Evaluate ``measure`` once per unordered pair and mirror the result."""
    n = len(items)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = float(measure(items[i], items[j]))
            if not math.isfinite(v) or v < 0:
                raise MeasurementError(f"measure returned {v!r} for pair ({i}, {j})", pair=(i, j))
            out[i, j] = out[j, i] = v
    return out


def cross_distance_matrix(queries, items, measure):
    out = np.zeros((len(queries), len(items)))
    for i, q in enumerate(queries):
        for j, it in enumerate(items):
            v = float(measure(q, it))
            if not math.isfinite(v) or v < 0:
                raise MeasurementError(f"measure returned {v!r} for pair ({i}, {j})", pair=(i, j))
            out[i, j] = v
    return out


def content_hash(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(str(a.dtype).encode())
        h.update(a.tobytes())
    return h.hexdigest()


class DistanceCache:
    """On-disk cache of matrices keyed by (dataset hash, measure, params).

    Each entry is ``<key>.npy`` plus a ``<key>.json`` sidecar recording the
    parameters and the SHA-256 of the stored matrix.
    """

    def __init__(self, root):
        self.root = Path(root) if root is not None else None

    @staticmethod
    def key(dataset_hash, measure, params):
        blob = json.dumps({"dataset": dataset_hash, "measure": measure, "params": params}, sort_keys=True)
        return f"{measure}-{hashlib.sha256(blob.encode()).hexdigest()[:20]}"

    def get_or_compute(self, dataset_hash, measure, params, compute):
        if self.root is None:
            return compute()
        key = self.key(dataset_hash, measure, params)
        npy, side = self.root / f"{key}.npy", self.root / f"{key}.json"
        if npy.exists() and side.exists():
            meta = json.loads(side.read_text())
            mat = np.load(npy)
            if meta.get("content_hash") == content_hash(mat):
                return mat
        mat = np.asarray(compute(), dtype=np.float64)
        self.root.mkdir(parents=True, exist_ok=True)
        np.save(npy, mat)
        side.write_text(
            json.dumps(
                {
                    "dataset": dataset_hash,
                    "measure": measure,
                    "params": params,
                    "shape": list(mat.shape),
                    "content_hash": content_hash(mat),
                },
                indent=2,
                sort_keys=True,
            )
        )
        return mat
