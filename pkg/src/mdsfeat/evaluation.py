"""Stratified cross-validation of feature extractors with an RBF SVM.

A feature method turns one fold (train/test index split of a labelled image
set) into train and test feature matrices for each requested length m.
Features are z-scored with train statistics and classified by an SVM with
C = 1 and kernel width gamma = m; "car" (+1) is the positive class.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    Kernel,
    gaussian_sigma_auto,
    kpca_fit,
    pca_fit,
    svm_predict,
    svm_train,
    zscore_fit_apply,
)
from .distances import DistanceCache, ImedParams, content_hash, imed_matrix_batch, spm1_distance, spm2_distance
from .errors import InvalidArgumentError, MdsFeatError
from .mds import IlmaOptions, encode_batch, ilma_fit
from .numeric import make_rng
from .spm import SpmPipeline, pyramid_length, similarity_matrix

log = logging.getLogger(__name__)

METHODS = ("pca", "kpca-gaussian", "kpca-poly", "imed-mds", "spm1-mds", "spm2-mds", "pyramid-pca")


def stratified_folds(labels, k=5, seed=0):
    """Fold id per item; every class is shuffled and split into k near-equal parts."""
    labels = np.asarray(labels)
    rng = make_rng(seed)
    fold = np.empty(labels.size, dtype=int)
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        for f, part in enumerate(np.array_split(idx, k)):
            fold[part] = f
    return fold


@dataclass(frozen=True)
class BinaryMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self):
        # no positive predictions: precision taken as 0
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def accuracy(self):
        total = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / total if total else 0.0


def binary_metrics(y_true, y_pred, positive=1):
    t = np.asarray(y_true) == positive
    p = np.asarray(y_pred) == positive
    return BinaryMetrics(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


@dataclass
class FoldReport:
    method: str
    rows: list = field(default_factory=list)  # dicts: m, fold, precision, recall, accuracy, error
    predictions: dict = field(default_factory=dict)  # (m, fold) -> (test_idx, y_true, y_pred)
    scatter: dict = field(default_factory=dict)  # m -> (item index, features) over all test folds
    traces: dict = field(default_factory=dict)  # (m, fold) -> RunTrace
    notes: dict = field(default_factory=dict)

    def mean(self, m, metric="accuracy"):
        vals = [r[metric] for r in self.rows if r["m"] == m and not r.get("error")]
        return float(np.mean(vals)) if vals else math.nan

    def failed(self):
        return [r for r in self.rows if r.get("error")]


# --- feature methods -----------------------------------------------------------


class FeatureMethod:
    name = "abstract"

    def fold_features(self, data, train, test, dims):
        """Return ``{m: (train_features, test_features)}``."""
        raise NotImplementedError

    def notes(self):
        return {}


def _flat(data, idx):
    return np.stack([data.images[i].ravel() for i in idx])


class PcaFeatures(FeatureMethod):
    name = "pca"

    def fold_features(self, data, train, test, dims):
        xtr, xte = _flat(data, train), _flat(data, test)
        model = pca_fit(xtr, max(dims))
        ftr, fte = model.project(xtr), model.project(xte)
        return {m: (ftr[:, :m], fte[:, :m]) for m in dims}


class KpcaFeatures(FeatureMethod):
    def __init__(self, kind="gaussian", degree=3, sigma=None):
        self.kind = kind
        self.degree = degree
        self.sigma = sigma
        self.name = "kpca-gaussian" if kind == "gaussian" else "kpca-poly"
        self._sigmas = []

    def fold_features(self, data, train, test, dims):
        xtr, xte = _flat(data, train), _flat(data, test)
        if self.kind == "gaussian":
            sigma = self.sigma or gaussian_sigma_auto(xtr)
            self._sigmas.append(sigma)
            kernel = Kernel("gaussian", sigma=sigma)
        else:
            kernel = Kernel("polynomial", degree=self.degree)
        model = kpca_fit(xtr, kernel, max(dims))
        ftr, fte = model.project(xtr), model.project(xte)
        out = {}
        for m in dims:
            if m > model.dims:
                raise InvalidArgumentError(f"kernel PCA yielded only {model.dims} usable components")
            out[m] = (ftr[:, :m], fte[:, :m])
        return out

    def notes(self):
        if self.kind != "gaussian":
            return {"kernel": f"(x.y + 1)^{self.degree}"}
        return {"sigma_rule": "mean pairwise distance over 1000 sampled pairs (stand-in rule)", "sigmas": self._sigmas}


class ImedDistances:
    """IMED between all images, computed once per dataset and sliced per fold."""

    name = "imed"

    def __init__(self, params=ImedParams(), cache=None):
        self.params = params
        self.cache = cache or DistanceCache(None)
        self._full = None

    def __call__(self, data, train, test):
        if self._full is None:
            key = {"sigma": self.params.sigma, "normalization": self.params.normalization}
            self._full = self.cache.get_or_compute(
                data.content_hash(), "imed", key, lambda: imed_matrix_batch(data.stack(), params=self.params)
            )
        d = self._full
        return d[np.ix_(train, train)], d[np.ix_(test, train)]


class SpmFoldCache:
    """Per-fold vocabulary and pyramid vectors shared by the SPM-based methods."""

    def __init__(self, vocab_size=200, levels=2, step=8, patch=16, seed=0, cache=None):
        self.pipeline_args = dict(vocab_size=vocab_size, levels=levels, step=step, patch=patch, seed=seed)
        self.cache = cache or DistanceCache(None)
        self._descs = None
        self._folds = {}

    @property
    def dimension(self):
        return pyramid_length(self.pipeline_args["vocab_size"], self.pipeline_args["levels"])

    def vectors(self, data, train):
        key = content_hash(np.asarray(train, dtype=np.int64))
        if key not in self._folds:
            if self._descs is None:
                self._descs = SpmPipeline(**self.pipeline_args).describe(data.images)
            pipe = SpmPipeline(**self.pipeline_args).fit([self._descs[i] for i in train])
            self._folds[key] = pipe.vectors(self._descs)
        return self._folds[key]

    def similarities(self, data, train, test):
        """(train x train, test x train) pyramid match similarities."""
        params = dict(self.pipeline_args, train=content_hash(np.asarray(train, dtype=np.int64)))
        idx = np.concatenate([train, test])

        def compute():
            v = self.vectors(data, train)
            return similarity_matrix(v[idx], v[train])

        k = self.cache.get_or_compute(data.content_hash(), "spm-similarity", params, compute)
        return k[: len(train)], k[len(train) :]


class SpmDistances:
    def __init__(self, folds, kind="spm1", epsilon=0.001):
        if kind not in ("spm1", "spm2"):
            raise InvalidArgumentError(f"unknown SPM distance {kind!r}")
        self.folds = folds
        self.kind = kind
        self.epsilon = epsilon
        self.name = kind

    def convert(self, k):
        return spm1_distance(k) if self.kind == "spm1" else spm2_distance(k, self.epsilon)

    def __call__(self, data, train, test):
        ktr, kte = self.folds.similarities(data, train, test)
        dtr = self.convert(ktr)
        dtr = 0.5 * (dtr + dtr.T)
        np.fill_diagonal(dtr, 0.0)
        return dtr, self.convert(kte)


class MdsFeatures(FeatureMethod):
    """ILMA codes for the training fold; test items encoded out of sample."""

    def __init__(self, distances, ilma=IlmaOptions(max_sweeps=30), name=None):
        self.distances = distances
        self.ilma = ilma
        self.name = name or f"{distances.name}-mds"
        self.last_traces = {}

    def fold_features(self, data, train, test, dims):
        dtr, dte = self.distances(data, train, test)
        out = {}
        self.last_traces = {}
        for m in dims:
            emb, trace = ilma_fit(dtr, m, self.ilma)
            self.last_traces[m] = trace
            out[m] = (emb.codes, encode_batch(emb.codes, dte, self.ilma.lm))
        return out


class PyramidPcaFeatures(FeatureMethod):
    name = "pyramid-pca"

    def __init__(self, folds):
        self.folds = folds

    def fold_features(self, data, train, test, dims):
        v = self.folds.vectors(data, train)
        model = pca_fit(v[train], max(dims))
        ftr, fte = model.project(v[train]), model.project(v[test])
        return {m: (ftr[:, :m], fte[:, :m]) for m in dims}


def make_method(name, *, sigma=1.0, vocab_size=200, levels=2, epsilon=0.001, step=8, patch=16,
                seed=0, ilma=None, cache=None, spm_folds=None):
    cache = cache or DistanceCache(None)
    ilma = ilma or IlmaOptions(max_sweeps=30, seed=seed)
    if name in ("spm1-mds", "spm2-mds", "pyramid-pca") and spm_folds is None:
        spm_folds = SpmFoldCache(vocab_size, levels, step, patch, seed, cache)
    if name == "pca":
        return PcaFeatures()
    if name == "kpca-gaussian":
        return KpcaFeatures("gaussian")
    if name == "kpca-poly":
        return KpcaFeatures("polynomial", degree=3)
    if name == "imed-mds":
        return MdsFeatures(ImedDistances(ImedParams(sigma), cache), ilma, name)
    if name in ("spm1-mds", "spm2-mds"):
        return MdsFeatures(SpmDistances(spm_folds, name[:4], epsilon), ilma, name)
    if name == "pyramid-pca":
        return PyramidPcaFeatures(spm_folds)
    raise InvalidArgumentError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")


def classify(ftr, ytr, fte, m, c=1.0):
    ztr, (zte,), _, _ = zscore_fit_apply(ftr, fte)
    model = svm_train(ztr, ytr, c=c, gamma=float(m))
    return svm_predict(model, zte)


def cross_validate(data, method, dims, folds=5, seed=0, c=1.0, fold_ids=None):
    """Run every fold for every feature length in ``dims``.

    A method failure on a fold is recorded on that fold's rows (``error``)
    instead of aborting the sweep.
    """
    dims = sorted(set(int(m) for m in dims))
    labels = np.asarray(data.labels)
    fold_ids = stratified_folds(labels, folds, seed) if fold_ids is None else np.asarray(fold_ids)
    report = FoldReport(method.name)
    scatter_parts = {m: [] for m in dims}
    for f in range(folds):
        test = np.flatnonzero(fold_ids == f)
        train = np.flatnonzero(fold_ids != f)
        try:
            feats = method.fold_features(data, train, test, dims)
        except MdsFeatError as exc:
            log.warning("%s failed on fold %d: %s", method.name, f, exc)
            for m in dims:
                report.rows.append(dict(method=method.name, m=m, fold=f, precision=math.nan,
                                        recall=math.nan, accuracy=math.nan, error=str(exc)))
            continue
        for m, trace in getattr(method, "last_traces", {}).items():
            report.traces[(m, f)] = trace
        for m in dims:
            ftr, fte = feats[m]
            pred = classify(ftr, labels[train], fte, m, c)
            met = binary_metrics(labels[test], pred)
            report.rows.append(dict(method=method.name, m=m, fold=f, precision=met.precision,
                                    recall=met.recall, accuracy=met.accuracy, error=""))
            report.predictions[(m, f)] = (test, labels[test], pred)
            scatter_parts[m].append((test, fte))
    for m, parts in scatter_parts.items():
        if parts:
            idx = np.concatenate([p[0] for p in parts])
            feats = np.concatenate([p[1] for p in parts])
            order = np.argsort(idx, kind="stable")
            report.scatter[m] = (idx[order], feats[order])
    report.notes = method.notes()
    return report
