"""Metric MDS: stress measures, the iterated Levenberg-Marquardt solver,
a SMACOF baseline and out-of-sample encoding.

A distance matrix is a symmetric, non-negative (N, N) array with zero
diagonal; it need not satisfy the triangle inequality.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _point_lm
from .errors import (
    DataError,
    DegenerateConfigurationError,
    DimensionError,
    InvalidArgumentError,
    NumericalError,
)
from .lm import LmOptions, lm_minimize
from .numeric import make_rng, random_permutation

STRATEGIES = ("random", "largest-first", "smallest-first")
_STRATEGY_ALIASES = {"largest": "largest-first", "smallest": "smallest-first"}


def check_distance_matrix(d, tol=1e-9):
    """Validate and return ``d`` as a float array (symmetrized exactly)."""
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionError(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise DataError("distance matrix has non-finite entries")
    if np.any(d < 0):
        raise DataError("distance matrix has negative entries")
    if np.any(np.abs(np.diag(d)) > tol):
        raise DataError("distance matrix diagonal is not zero")
    if d.size and np.max(np.abs(d - d.T)) > tol * max(1.0, float(d.max())):
        raise DataError("distance matrix is not symmetric")
    out = 0.5 * (d + d.T)
    np.fill_diagonal(out, 0.0)
    return out


def pairwise_distances(x):
    x = np.asarray(x, dtype=np.float64)
    sq = (x * x).sum(1)
    d2 = sq[:, None] - 2.0 * x @ x.T + sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def _exact_pairwise(x):
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff * diff).sum(-1))


def _check_codes(d, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != d.shape[0]:
        raise DimensionError(f"codes have {x.shape[0]} rows, distance matrix has {d.shape[0]}")
    return x


def raw_stress(d, x):
    """Sum over unordered pairs of (d_ij - ||x_i - x_j||)^2."""
    d = np.asarray(d, dtype=np.float64)
    x = _check_codes(d, x)
    iu = np.triu_indices(d.shape[0], 1)
    e = d[iu] - _exact_pairwise(x)[iu]
    return float(e @ e)


def stress1(d, x):
    """Kruskal's Stress-1: sqrt(raw stress / sum of squared embedded distances)."""
    d = np.asarray(d, dtype=np.float64)
    x = _check_codes(d, x)
    iu = np.triu_indices(d.shape[0], 1)
    dist = _exact_pairwise(x)[iu]
    denom = float(dist @ dist)
    if denom <= 0.0:
        raise DegenerateConfigurationError("all embedded points coincide")
    e = d[iu] - dist
    return float(np.sqrt((e @ e) / denom))


@dataclass(frozen=True)
class Embedding:
    codes: np.ndarray
    raw_stress: float
    stress1: float

    @property
    def dimension(self):
        return self.codes.shape[1]

    @classmethod
    def from_codes(cls, d, codes):
        codes = np.array(codes, dtype=np.float64)
        try:
            s1 = stress1(d, codes)
        except DegenerateConfigurationError:
            s1 = float("nan")
        return cls(codes, raw_stress(d, codes), s1)


@dataclass
class RunTrace:
    """Raw stress sampled once after initialization and after every sweep."""

    samples: list = field(default_factory=list)  # (iteration, raw_stress, elapsed_seconds)

    def add(self, iteration, stress, elapsed):
        self.samples.append((int(iteration), float(stress), float(elapsed)))

    @property
    def stresses(self):
        return np.array([s[1] for s in self.samples])

    @property
    def times(self):
        return np.array([s[2] for s in self.samples])

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class IlmaOptions:
    max_sweeps: int = 50
    tolerance: float = 1e-4
    strategy: str = "random"
    seed: int = 0
    lm: LmOptions = field(default_factory=LmOptions)
    # candidate starting directions tried when inserting a point
    init_starts: int = 4
    backend: str = "compiled"

    def __post_init__(self):
        strategy = _STRATEGY_ALIASES.get(self.strategy, self.strategy)
        if strategy not in STRATEGIES:
            raise InvalidArgumentError(f"unknown init strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", strategy)
        if self.max_sweeps < 0:
            raise InvalidArgumentError("max_sweeps must be >= 0")
        if self.tolerance <= 0:
            raise InvalidArgumentError("tolerance must be > 0")
        if self.backend not in ("compiled", "generic"):
            raise InvalidArgumentError(f"unknown backend {self.backend!r}")


_REASONS = {
    _point_lm.GRADIENT: "gradient",
    _point_lm.STEP: "step",
    _point_lm.MAX_ITER: "max-iter",
}


def point_objective(x, anchors, targets, active=None):
    """sum over active anchors of (||x - anchor_i|| - target_i)^2."""
    if active is None:
        active = np.ones(anchors.shape[0], dtype=bool)
    diff = anchors[active] - np.asarray(x, dtype=np.float64)
    r = np.sqrt((diff * diff).sum(1)) - targets[active]
    return float(r @ r)


def point_problem(anchors, targets):
    """Residual and analytic jacobian for placing one point against anchors."""
    anchors = np.asarray(anchors, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)

    def residual(x):
        diff = x - anchors
        return np.sqrt((diff * diff).sum(1)) - targets

    def jacobian(x):
        diff = x - anchors
        dist = np.sqrt((diff * diff).sum(1))
        J = np.zeros_like(diff)
        ok = dist > 0
        J[ok] = diff[ok] / dist[ok, None]
        J[~ok, 0] = 1.0
        return J

    return residual, jacobian


def solve_point(x0, anchors, targets, active, lm_opts, backend="compiled"):
    """Place one point by LM against the active anchors. Returns (x, cost)."""
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    if backend == "generic":
        residual, jacobian = point_problem(anchors[active], targets[active])
        res = lm_minimize(residual, x0, jacobian, lm_opts)
        return res.solution, res.final_cost
    x, cost, _, reason = _point_lm.solve_point(
        x0,
        anchors,
        targets,
        active,
        lm_opts.initial_damping,
        lm_opts.damping_up,
        lm_opts.damping_down,
        lm_opts.max_iterations,
        lm_opts.gradient_tolerance,
        lm_opts.step_tolerance,
    )
    if reason == _point_lm.NONFINITE:
        raise NumericalError("point subproblem became non-finite", last_iterate=x)
    return x, cost


def _first_pair(d, strategy, rng):
    n = d.shape[0]
    iu, ju = np.triu_indices(n, 1)
    vals = d[iu, ju]
    if strategy == "random":
        k = int(rng.integers(vals.size))
    elif strategy == "largest-first":
        k = int(np.argmax(vals))  # row-major order: lowest (i, j) wins ties
    else:
        k = int(np.argmin(vals))
    return int(iu[k]), int(ju[k])


def _trilaterate(anchors, targets):
    """Least-squares point from the linearized range equations.

    Subtracting the mean of |x - a_k|^2 = t_k^2 over k leaves a linear
    system in x; it is exact for realizable targets once the anchors span
    the space.
    """
    ac = anchors - anchors.mean(0)
    sq = (anchors * anchors).sum(1)
    t2 = targets * targets
    rhs = 0.5 * ((sq - sq.mean()) - (t2 - t2.mean()))
    x, *_ = np.linalg.lstsq(ac, rhs, rcond=None)
    return x


def ilma_init(d, m, strategy="random", rng=None, lm_opts=None, init_starts=4, backend="compiled"):
    """Greedy point-by-point placement (the initialization stage).

    Returns ``(codes, order)`` where ``order`` is the insertion order.
    The first pair goes to the origin and to ``(D[i0, j0], 0, ..., 0)``;
    every later point is placed by LM against all points placed so far,
    started from ``init_starts`` random directions around its nearest placed
    neighbour and from the linearized trilateration point; the start that
    converges to the lowest cost wins.
    """
    d = check_distance_matrix(d)
    n = d.shape[0]
    if n < 2:
        raise InvalidArgumentError("need at least two items")
    if m < 1:
        raise InvalidArgumentError("dimension must be >= 1")
    strategy = _STRATEGY_ALIASES.get(strategy, strategy)
    if strategy not in STRATEGIES:
        raise InvalidArgumentError(f"unknown init strategy {strategy!r}")
    rng = make_rng(0) if rng is None else rng
    lm_opts = lm_opts or LmOptions()

    codes = np.zeros((n, m))
    placed = np.zeros(n, dtype=bool)
    i0, j0 = _first_pair(d, strategy, rng)
    codes[j0, 0] = d[i0, j0]
    placed[[i0, j0]] = True
    order = [i0, j0]

    # best[j]: extreme distance from j to the placed set; via[j]: lowest placed index attaining it
    if strategy != "random":
        pick = np.maximum if strategy == "largest-first" else np.minimum
        best = pick(d[i0], d[j0])
        via = np.where(d[i0] == best, i0, j0)
        if j0 < i0:
            via = np.where(d[j0] == best, j0, i0)

    while len(order) < n:
        candidates = np.flatnonzero(~placed)
        if strategy == "random":
            j = int(candidates[rng.integers(candidates.size)])
        else:
            key = best[candidates] if strategy == "smallest-first" else -best[candidates]
            # lexicographic on (value, i*, j*)
            k = np.lexsort((candidates, via[candidates], key))[0]
            j = int(candidates[k])

        near = np.flatnonzero(placed)
        near = near[np.argmin(d[j, near])]
        dirs = rng.standard_normal((max(1, init_starts), m))
        dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
        starts = np.vstack([codes[near] + d[j, near] * dirs, _trilaterate(codes[placed], d[j, placed])])
        # LM from every start; keep the lowest final cost (first on ties)
        fits = [solve_point(x0, codes, d[j], placed, lm_opts, backend) for x0 in starts]
        codes[j] = fits[int(np.argmin([c for _, c in fits]))][0]
        placed[j] = True
        order.append(j)

        if strategy != "random":
            row = d[j]
            better = row > best if strategy == "largest-first" else row < best
            tie = (row == best) & (j < via)
            upd = better | tie
            best = np.where(upd, row, best)
            via = np.where(upd, j, via)
    return codes, np.array(order)


def ilma_fit(d, m, options=None):
    """Fit MDS codes with the two-stage iterated Levenberg-Marquardt algorithm.

    After the greedy initialization, each adjustment sweep visits every
    point in a fresh random permutation and re-solves its position against
    all other points, warm-started from where it is. Sweeps stop after
    ``max_sweeps`` or once the relative decrease of raw stress between two
    consecutive sweeps falls below ``tolerance``.

    Returns
    -------
    (Embedding, RunTrace)
    """
    opts = options or IlmaOptions()
    d = check_distance_matrix(d)
    n = d.shape[0]
    rng = make_rng(opts.seed)
    t0 = time.perf_counter()
    codes, _ = ilma_init(d, m, opts.strategy, rng, opts.lm, opts.init_starts, opts.backend)
    trace = RunTrace()
    stress = raw_stress(d, codes)
    trace.add(0, stress, time.perf_counter() - t0)

    active = np.ones(n, dtype=bool)
    for sweep in range(1, opts.max_sweeps + 1):
        for p in random_permutation(n, rng):
            active[p] = False
            codes[p], _ = solve_point(codes[p], codes, d[p], active, opts.lm, opts.backend)
            active[p] = True
        prev, stress = stress, raw_stress(d, codes)
        trace.add(sweep, stress, time.perf_counter() - t0)
        if stress == 0.0 or (prev - stress) / stress < opts.tolerance:
            break
    return Embedding.from_codes(d, codes), trace


def guttman_transform(d, x):
    """One SMACOF majorization update with unit weights."""
    n = d.shape[0]
    dist = pairwise_distances(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(dist > 0, -d / dist, 0.0)
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(1))
    return b @ x / n


def smacof_fit(d, m, max_iter=300, seed=0, tolerance=1e-4, time_budget=None, init=None):
    """Plain SMACOF from a seeded uniform start in ``[0, max(D)]^m``.

    Stops on relative stress change below ``tolerance``, after ``max_iter``
    updates, or once ``time_budget`` seconds have elapsed.
    """
    d = check_distance_matrix(d)
    n = d.shape[0]
    if n < 2:
        raise InvalidArgumentError("need at least two items")
    rng = make_rng(seed)
    t0 = time.perf_counter()
    if init is None:
        x = rng.uniform(0.0, float(d.max()), size=(n, m))
    else:
        x = np.array(init, dtype=np.float64)
    trace = RunTrace()
    stress = raw_stress(d, x)
    trace.add(0, stress, time.perf_counter() - t0)
    for it in range(1, max_iter + 1):
        x = guttman_transform(d, x)
        prev, stress = stress, raw_stress(d, x)
        elapsed = time.perf_counter() - t0
        trace.add(it, stress, elapsed)
        if stress == 0.0 or (prev - stress) / prev < tolerance:
            break
        if time_budget is not None and elapsed >= time_budget:
            break
    return Embedding.from_codes(d, x), trace


def encode_new(train_codes, dists, lm_opts=None, backend="compiled"):
    """Code for a new item from its distances to every training item.

    Minimizes ``sum_i (||x - x_i|| - dists_i)^2`` starting from the code of
    the training item with the smallest distance.
    """
    if isinstance(train_codes, Embedding):
        train_codes = train_codes.codes
    codes = np.ascontiguousarray(train_codes, dtype=np.float64)
    dists = np.asarray(dists, dtype=np.float64).ravel()
    if codes.shape[0] == 0:
        raise InvalidArgumentError("no training items to encode against")
    if dists.size != codes.shape[0]:
        raise DimensionError(f"got {dists.size} distances for {codes.shape[0]} training items")
    if not np.all(np.isfinite(dists)) or np.any(dists < 0):
        raise DataError("distances must be finite and non-negative")
    active = np.ones(codes.shape[0], dtype=bool)
    x0 = codes[int(np.argmin(dists))]
    x, _ = solve_point(x0, codes, dists, active, lm_opts or LmOptions(), backend)
    return x


def encode_batch(train_codes, dist_rows, lm_opts=None, backend="compiled"):
    dist_rows = np.atleast_2d(np.asarray(dist_rows, dtype=np.float64))
    return np.array([encode_new(train_codes, row, lm_opts, backend) for row in dist_rows])


def procrustes_align(source, target):
    """Rotate/reflect and translate ``source`` onto ``target`` (least squares)."""
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    sc, tc = src.mean(0), tgt.mean(0)
    u, _, vt = np.linalg.svd((src - sc).T @ (tgt - tc))
    return (src - sc) @ (u @ vt) + tc
