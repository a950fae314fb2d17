"""Spatial pyramid matching on dense gradient-orientation descriptors.

Descriptors are SIFT-like (4x4 cells x 8 orientation bins) but computed on
a fixed dense grid without scale or rotation normalization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .distances import as_image
from .errors import DimensionError, InvalidArgumentError
from .numeric import kmeans, make_rng, sq_distances

log = logging.getLogger(__name__)

CELLS = 4
BINS = 8
DESCRIPTOR_LENGTH = CELLS * CELLS * BINS
CLIP = 0.2
_ZERO_NORM = 1e-10


@dataclass(frozen=True)
class Descriptors:
    """Descriptors of one image: ``positions`` are (row, col) patch centres."""

    positions: np.ndarray  # (n, 2)
    vectors: np.ndarray  # (n, 128), rows unit length or zero
    image_shape: tuple

    def __len__(self):
        return self.vectors.shape[0]

    def nonzero(self):
        keep = np.linalg.norm(self.vectors, axis=1) > 0
        return Descriptors(self.positions[keep], self.vectors[keep], self.image_shape)


def _orientation_channels(img):
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    # bin 0 is centred on a gradient pointing along +col
    b = np.floor(ang / (2 * np.pi / BINS) + 0.5).astype(int) % BINS
    chans = np.zeros((BINS,) + img.shape)
    np.put_along_axis(chans, b[None], mag[None], axis=0)
    return chans


def grid_shape(height, width, step, patch):
    return (height - patch) // step + 1, (width - patch) // step + 1


def dense_descriptors(img, step=8, patch=16):
    """Gradient-orientation histograms on a regular grid of square patches."""
    img = as_image(img)
    h, w = img.shape
    if step < 1 or patch < CELLS:
        raise InvalidArgumentError(f"need step >= 1 and patch >= {CELLS}")
    if patch > min(h, w):
        raise InvalidArgumentError(f"patch {patch} does not fit a {h}x{w} image")
    chans = _orientation_channels(img)
    integral = np.zeros((BINS, h + 1, w + 1))
    integral[:, 1:, 1:] = chans.cumsum(1).cumsum(2)

    gr, gc = grid_shape(h, w, step, patch)
    r0 = np.arange(gr) * step
    c0 = np.arange(gc) * step
    edges = np.round(np.linspace(0, patch, CELLS + 1)).astype(int)
    # cell sums for every patch: (BINS, gr, gc, CELLS, CELLS)
    top = r0[:, None] + edges[None, :-1]
    bot = r0[:, None] + edges[None, 1:]
    left = c0[:, None] + edges[None, :-1]
    right = c0[:, None] + edges[None, 1:]
    T, B = top[:, None, :, None], bot[:, None, :, None]
    L, R = left[None, :, None, :], right[None, :, None, :]
    sums = integral[:, B, R] - integral[:, T, R] - integral[:, B, L] + integral[:, T, L]
    np.maximum(sums, 0.0, out=sums)  # integral-image cancellation can leave -1e-16
    vec = sums.transpose(1, 2, 3, 4, 0).reshape(gr * gc, DESCRIPTOR_LENGTH)

    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    flat = norm[:, 0] <= _ZERO_NORM
    vec = np.divide(vec, norm, out=np.zeros_like(vec), where=~flat[:, None])
    np.minimum(vec, CLIP, out=vec)
    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    vec = np.divide(vec, norm, out=np.zeros_like(vec), where=norm > 0)
    vec[flat] = 0.0

    rr, cc = np.meshgrid(r0 + patch / 2.0, c0 + patch / 2.0, indexing="ij")
    pos = np.column_stack([rr.ravel(), cc.ravel()])
    return Descriptors(pos, vec, (h, w))


@dataclass(frozen=True)
class Vocabulary:
    centroids: np.ndarray  # (M, 128)
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.centroids.shape[0]

    def assign(self, vectors):
        if len(vectors) == 0:
            return np.zeros(0, dtype=int)
        return np.argmin(sq_distances(np.asarray(vectors, dtype=np.float64), self.centroids), axis=1)


def build_vocabulary(descriptors, size, rng=None, max_iter=100):
    """k-means visual words over pooled descriptors; zero vectors are dropped."""
    data = np.asarray(descriptors, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != DESCRIPTOR_LENGTH:
        raise DimensionError(f"expected an (n, {DESCRIPTOR_LENGTH}) descriptor matrix")
    data = data[np.linalg.norm(data, axis=1) > 0]
    if data.shape[0] < size:
        raise InvalidArgumentError(f"{data.shape[0]} non-zero descriptors cannot make {size} words")
    rng = make_rng(0) if rng is None else rng
    res = kmeans(data, size, rng, max_iter=max_iter)
    return Vocabulary(res.centroids, {"size": size})


def pyramid_length(vocab_size, levels):
    return vocab_size * (4 ** (levels + 1) - 1) // 3


def level_weights(levels):
    """1/2^L for level 0 and 1/2^(L-l+1) for level l >= 1."""
    return np.array([1.0 / 2**levels] + [1.0 / 2 ** (levels - l + 1) for l in range(1, levels + 1)])


@dataclass(frozen=True)
class PyramidVector:
    levels: int
    vocab_size: int
    histogram: np.ndarray
    descriptor_count: int

    @property
    def empty(self):
        return self.descriptor_count == 0

    def level_slice(self, level):
        start = self.vocab_size * (4**level - 1) // 3
        return slice(start, start + self.vocab_size * 4**level)


def pyramid_vector(descs, vocab, levels=2):
    """Weighted multi-level word histogram of one image.

    Level l splits the image into 2^l x 2^l cells; per-cell histograms are
    concatenated level by level (cells row-major) and divided by the number
    of (non-zero) descriptors, then scaled by the level weight.
    """
    if levels < 0:
        raise InvalidArgumentError("levels must be >= 0")
    h, w = descs.image_shape
    used = descs.nonzero()
    m = vocab.size
    out = np.zeros(pyramid_length(m, levels))
    n = len(used)
    if n == 0:
        log.warning("image without usable descriptors; pyramid vector is all zero")
        return PyramidVector(levels, m, out, 0)
    pos = used.positions
    if np.any(pos < 0) or np.any(pos[:, 0] > h) or np.any(pos[:, 1] > w):
        raise InvalidArgumentError("descriptor positioned outside the image")
    words = vocab.assign(used.vectors)
    weights = level_weights(levels)
    offset = 0
    for lvl in range(levels + 1):
        cells = 2**lvl
        cr = np.minimum((pos[:, 0] * cells / h).astype(int), cells - 1)
        cc = np.minimum((pos[:, 1] * cells / w).astype(int), cells - 1)
        idx = offset + (cr * cells + cc) * m + words
        np.add.at(out, idx, weights[lvl] / n)
        offset += m * cells * cells
    return PyramidVector(levels, m, out, n)


def intersection(a, b):
    return float(np.minimum(a, b).sum())


def pyramid_match_similarity(a, b):
    """Normalized weighted histogram intersection, in [0, 1]."""
    if (a.levels, a.vocab_size) != (b.levels, b.vocab_size):
        raise DimensionError("pyramid vectors built with different vocabulary size or levels")
    if a.empty or b.empty:
        return 1.0 if a.empty and b.empty else 0.0
    denom = np.sqrt(intersection(a.histogram, a.histogram) * intersection(b.histogram, b.histogram))
    return float(min(1.0, intersection(a.histogram, b.histogram) / denom))


@njit(cache=True)
def _sparse_min_sums(indptr, indices, values, dense):
    n = indptr.size - 1
    out = np.zeros((n, dense.shape[0]))
    for i in range(n):
        for j in range(dense.shape[0]):
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                v = dense[j, indices[p]]
                a = values[p]
                s += a if a < v else v
            out[i, j] = s
    return out


def similarity_matrix(rows, cols=None):
    """Pyramid match similarity between every row of two histogram stacks."""
    a = np.ascontiguousarray(rows, dtype=np.float64)
    b = a if cols is None else np.ascontiguousarray(cols, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionError("histogram stacks differ in length")
    nz = a > 0
    indptr = np.concatenate([[0], np.cumsum(nz.sum(1))]).astype(np.int64)
    indices = np.nonzero(nz)[1].astype(np.int64)
    inter = _sparse_min_sums(indptr, indices, a[nz], b)
    sa, sb = a.sum(1), b.sum(1)  # self-intersection is the plain sum
    denom = np.sqrt(np.outer(sa, sb))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(denom > 0, inter / denom, 0.0)
    both_empty = (sa[:, None] == 0) & (sb[None, :] == 0)
    k[both_empty] = 1.0
    k = np.clip(k, 0.0, 1.0)
    if cols is None:
        k = 0.5 * (k + k.T)
        np.fill_diagonal(k, 1.0)
    return k


class SpmPipeline:
    """Descriptor extraction, vocabulary and pyramid vectors for a set of images."""

    def __init__(self, vocab_size=200, levels=2, step=8, patch=16, seed=0):
        self.vocab_size = vocab_size
        self.levels = levels
        self.step = step
        self.patch = patch
        self.seed = seed
        self.vocabulary = None

    def describe(self, images):
        return [dense_descriptors(im, self.step, self.patch) for im in images]

    def fit(self, descs):
        pooled = np.concatenate([d.vectors for d in descs])
        self.vocabulary = build_vocabulary(pooled, self.vocab_size, make_rng(self.seed))
        self.vocabulary.meta.update(
            {"patch": self.patch, "step": self.step, "seed": self.seed, "levels": self.levels}
        )
        return self

    def vectors(self, descs):
        if self.vocabulary is None:
            raise InvalidArgumentError("pipeline has no vocabulary; call fit first")
        return np.array([pyramid_vector(d, self.vocabulary, self.levels).histogram for d in descs])
