"""CSV/JSON artifact formats.

Floats are written with 17 significant digits so every file round-trips
exactly and identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataError, IngestionError
from .mds import RunTrace, check_distance_matrix
from .spm import Vocabulary


def fmt(x):
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)
    return path


def _read_numeric(path, header=True):
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    head = rows[0] if header and rows else None
    body = rows[1:] if header else rows
    try:
        data = np.array([[float(v) for v in r] for r in body if r], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    return head, data


def write_matrix_csv(path, mat, header=None):
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    return _write_rows(path, header, ([fmt(v) for v in row] for row in mat))


def write_embedding_csv(path, codes):
    codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    return write_matrix_csv(path, codes, [f"dim{k}" for k in range(codes.shape[1])])


def read_embedding_csv(path):
    head, data = _read_numeric(path, header=True)
    if not head or not all(h == f"dim{k}" for k, h in enumerate(head)):
        raise DataError(f"{path}: expected header dim0..dim{{m-1}}")
    return data.reshape(-1, len(head))


def write_distance_csv(path, d):
    return write_matrix_csv(path, d)


def read_distance_csv(path, tol=1e-9):
    """Load an N x N matrix (no header) and validate it as a distance matrix."""
    _, data = _read_numeric(path, header=False)
    return check_distance_matrix(data, tol=tol)


def write_trace_csv(path, trace):
    rows = ([str(it), fmt(s), fmt(t)] for it, s, t in trace.samples)
    return _write_rows(path, ["iteration", "raw_stress", "elapsed_seconds"], rows)


def read_trace_csv(path):
    _, data = _read_numeric(path)
    trace = RunTrace()
    for it, s, t in data:
        trace.add(int(it), s, t)
    return trace


def write_vocabulary(path, vocab):
    """``path`` gets the M x 128 centroid CSV; metadata goes to a .json sidecar."""
    path = Path(path)
    write_matrix_csv(path, vocab.centroids)
    meta = dict(vocab.meta)
    meta["size"] = vocab.size
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_vocabulary(path):
    path = Path(path)
    _, cent = _read_numeric(path, header=False)
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    if meta.get("size", cent.shape[0]) != cent.shape[0]:
        raise DataError(f"{path}: sidecar size {meta['size']} != {cent.shape[0]} rows")
    return Vocabulary(cent, meta)


def write_pyramid_batch(path, vectors, names=None):
    """One image per row; with ``names`` the first column is the image name."""
    vectors = np.atleast_2d(vectors)
    if names is None:
        return write_matrix_csv(path, vectors)
    return _write_rows(path, None, ([n] + [fmt(v) for v in row] for n, row in zip(names, vectors)))


RESULT_HEADER = ["method", "m", "fold", "precision", "recall", "accuracy"]


def write_results_csv(path, rows):
    body = ([r["method"], str(r["m"]), str(r["fold"]), fmt(r["precision"]), fmt(r["recall"]), fmt(r["accuracy"])] for r in rows)
    return _write_rows(path, RESULT_HEADER, body)


def read_results_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["m"] = int(r["m"])
        r["fold"] = int(r["fold"])
        for k in ("precision", "recall", "accuracy"):
            r[k] = float(r[k])
    return rows


def write_scatter_csv(path, method, labels, feats):
    feats = np.atleast_2d(feats)
    body = ([method, str(int(lab)), fmt(f[0]), fmt(f[1])] for lab, f in zip(labels, feats))
    return _write_rows(path, ["method", "label", "dim0", "dim1"], body)
