"""Experiment orchestration: car-recognition cross-validation runs and the
Swiss-roll solver benchmark, each writing a self-describing run directory."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import SwissRollSpec, load_image_dataset, swiss_roll
from .distances import DistanceCache, content_hash, geodesic_distance_matrix
from .errors import InvalidArgumentError
from .evaluation import METHODS, SpmFoldCache, cross_validate, make_method, stratified_folds
from .io import write_results_csv, write_scatter_csv, write_trace_csv
from .mds import STRATEGIES, IlmaOptions, ilma_fit, smacof_fit

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    method: str = "pca"
    data: str = ""
    layout: str = "uiuc"
    dims: list = field(default_factory=lambda: list(range(1, 21)))
    folds: int = 5
    seed: int = 0
    sigma: float = 1.0
    vocab_size: int = 200
    levels: int = 2
    epsilon: float = 0.001
    step: int = 8
    patch: int = 16
    sweeps: int = 30
    tolerance: float = 1e-4
    strategy: str = "random"
    svm_c: float = 1.0
    cache_dir: str = ""
    out: str = "runs"

    def validate(self):
        methods = self.method.split(",")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise InvalidArgumentError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
        if not self.dims or min(self.dims) < 1:
            raise InvalidArgumentError("dims must be a non-empty list of positive lengths")
        if self.folds < 2:
            raise InvalidArgumentError("need at least two folds")
        if self.sigma <= 0 or not 0 < self.epsilon < 1:
            raise InvalidArgumentError("sigma must be > 0 and epsilon in (0, 1)")
        if self.vocab_size < 1 or self.levels < 0:
            raise InvalidArgumentError("vocab_size must be >= 1 and levels >= 0")
        if self.strategy not in STRATEGIES and self.strategy not in ("largest", "smallest"):
            raise InvalidArgumentError(f"unknown strategy {self.strategy!r}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        """Hash of everything that influences results (not where they go)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("cache_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d):
        if "config" in d and isinstance(d["config"], dict):  # a run manifest
            d = d["config"]
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _run_dir(out, digest):
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    path = Path(out) / f"{stamp}-{digest}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def run_experiment(config, data=None):
    """Cross-validate each configured method and write a run directory.

    Layout: ``manifest.json``, ``results.csv`` (method,m,fold,precision,
    recall,accuracy), ``features/scatter-<method>.csv`` for m = 2 and
    ``traces/<method>-m<m>-fold<f>.csv`` for MDS fits. Returns the path.
    """
    config.validate()
    t_start = time.perf_counter()
    if data is None:
        if not config.data:
            raise InvalidArgumentError("no dataset given (config.data is empty)")
        data = load_image_dataset(config.data, config.layout)
    cache = DistanceCache(config.cache_dir or None)
    run = _run_dir(config.out, config.digest())
    (run / "features").mkdir()
    (run / "traces").mkdir()

    fold_ids = stratified_folds(data.labels, config.folds, config.seed)
    np.savetxt(run / "folds.csv", fold_ids, fmt="%d")
    ilma = IlmaOptions(max_sweeps=config.sweeps, tolerance=config.tolerance, strategy=config.strategy, seed=config.seed)
    spm_folds = SpmFoldCache(config.vocab_size, config.levels, config.step, config.patch, config.seed, cache)

    rows, methods_meta, failures = [], {}, []
    for name in config.method.split(","):
        t0 = time.perf_counter()
        method = make_method(
            name, sigma=config.sigma, vocab_size=config.vocab_size, levels=config.levels,
            epsilon=config.epsilon, step=config.step, patch=config.patch, seed=config.seed,
            ilma=ilma, cache=cache, spm_folds=spm_folds,
        )
        report = cross_validate(data, method, config.dims, config.folds, config.seed, config.svm_c, fold_ids)
        rows.extend(report.rows)
        failures.extend(report.failed())
        if 2 in report.scatter:
            idx, feats = report.scatter[2]
            write_scatter_csv(run / "features" / f"scatter-{name}.csv", name, data.labels[idx], feats)
        for (m, f), trace in sorted(report.traces.items()):
            write_trace_csv(run / "traces" / f"{name}-m{m}-fold{f}.csv", trace)
        meta = {"wall_seconds": time.perf_counter() - t0, "notes": report.notes}
        if name in ("spm1-mds", "spm2-mds", "pyramid-pca"):
            meta["pyramid_dimension"] = spm_folds.dimension
        methods_meta[name] = meta
        log.info("%s done in %.1fs", name, meta["wall_seconds"])

    results = write_results_csv(run / "results.csv", rows)
    artifacts = sorted(p for p in run.rglob("*.csv"))
    manifest = {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "package_version": __version__,
        "python": platform.python_version(),
        "dataset": {
            "root": config.data,
            "layout": data.layout or config.layout,
            "items": len(data),
            "content_hash": data.content_hash(),
            "class_counts": {str(k): int(v) for k, v in zip(*np.unique(data.labels, return_counts=True))},
        },
        "seeds": {"folds": config.seed, "ilma": config.seed, "vocabulary": config.seed},
        "methods": methods_meta,
        "failed_folds": [{k: r[k] for k in ("method", "m", "fold", "error")} for r in failures],
        "artifacts": {str(p.relative_to(run)): _file_hash(p) for p in artifacts},
        "results_hash": _file_hash(results),
        "wall_seconds": time.perf_counter() - t_start,
    }
    (run / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return run


# --- Swiss roll benchmark ----------------------------------------------------------


@dataclass
class BenchResult:
    traces: dict  # (method, repeat) -> RunTrace; method is a strategy name or "smacof"
    distances: np.ndarray
    out: Path | None = None

    def mean_stress(self, method):
        runs = [t.stresses for (m, _), t in self.traces.items() if m == method]
        n = min(len(s) for s in runs)
        return np.mean([s[:n] for s in runs], axis=0)

    def final(self, method):
        reps = sorted(r for (m, r) in self.traces if m == method)
        return np.array([self.traces[(method, r)].stresses[-1] for r in reps])


def bench_swissroll(strategies=STRATEGIES, m=3, sweeps=10, repeats=20, n=591, knn=8, seed=0,
                    smacof=True, out=None):
    """ILMA under each initialization strategy (and SMACOF) on the Swiss roll.

    Every ILMA run does exactly ``sweeps`` adjustment sweeps. SMACOF repeat r
    gets the wall time used by the r-th random-strategy ILMA run (or by the
    first strategy when random is not benchmarked).

    With ``out`` the following CSVs are written there:
    ``stress_per_iteration.csv`` (strategy,iteration,mean_raw_stress),
    ``stress_vs_time.csv`` (method,repeat,iteration,raw_stress,elapsed_seconds),
    ``final_stress.csv`` (repeat,method,raw_stress) and one trace per run.
    """
    strategies = [{"largest": "largest-first", "smallest": "smallest-first"}.get(s, s) for s in strategies]
    pts = swiss_roll(SwissRollSpec(n=n, seed=seed))
    d = geodesic_distance_matrix(pts, knn)
    traces = {}
    for strategy in strategies:
        for r in range(repeats):
            # tolerance tiny so every run does the same number of sweeps
            opts = IlmaOptions(max_sweeps=sweeps, tolerance=1e-300, strategy=strategy, seed=seed * 1000 + r)
            _, trace = ilma_fit(d, m, opts)
            traces[(strategy, r)] = trace
    if smacof:
        ref = "random" if "random" in strategies else strategies[0]
        for r in range(repeats):
            budget = traces[(ref, r)].times[-1]
            _, trace = smacof_fit(d, m, max_iter=100_000, seed=seed * 1000 + r, tolerance=1e-12, time_budget=budget)
            traces[("smacof", r)] = trace
    result = BenchResult(traces, d)
    if out is not None:
        result.out = _write_bench(Path(out), result, strategies)
    return result


def _write_bench(out, result, strategies):
    from .io import _write_rows, fmt

    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in strategies:
        for it, v in enumerate(result.mean_stress(s)):
            rows.append([s, str(it), fmt(v)])
        _write_rows(out / f"mean-trace-{s}.csv", ["iteration", "mean_raw_stress"],
                    [[str(it), fmt(v)] for it, v in enumerate(result.mean_stress(s))])
    _write_rows(out / "stress_per_iteration.csv", ["strategy", "iteration", "mean_raw_stress"], rows)
    tv = [[meth, str(r), str(it), fmt(st), fmt(el)]
          for (meth, r), tr in sorted(result.traces.items()) for it, st, el in tr.samples]
    _write_rows(out / "stress_vs_time.csv", ["method", "repeat", "iteration", "raw_stress", "elapsed_seconds"], tv)
    fin = [[str(r), meth, fmt(tr.stresses[-1])] for (meth, r), tr in sorted(result.traces.items())]
    _write_rows(out / "final_stress.csv", ["repeat", "method", "raw_stress"], fin)
    (out / "traces").mkdir(exist_ok=True)
    for (meth, r), tr in result.traces.items():
        write_trace_csv(out / "traces" / f"{meth}-{r:02d}.csv", tr)
    return out
