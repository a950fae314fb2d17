"""Command line entry point: ``mdsfeat <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .datasets import SwissRollSpec, load_image_dataset, swiss_roll
from .distances import ImedParams, geodesic_distance_matrix, imed_matrix_batch, euclidean_matrix, spm1_distance, spm2_distance
from .errors import InvalidArgumentError, MdsFeatError
from .experiments import ExperimentConfig, bench_swissroll, run_experiment
from .io import (
    read_distance_csv,
    read_embedding_csv,
    read_vocabulary,
    write_distance_csv,
    write_embedding_csv,
    write_matrix_csv,
    write_pyramid_batch,
    write_trace_csv,
    write_vocabulary,
)
from .mds import IlmaOptions, encode_batch, ilma_fit
from .spm import SpmPipeline, similarity_matrix

log = logging.getLogger("mdsfeat")

STRATEGY_CHOICES = ("random", "largest", "smallest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dims(text):
    """``5``, ``1,2,5`` or ``1-20`` (mixable)."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return out


def _strategy(name):
    return {"largest": "largest-first", "smallest": "smallest-first"}.get(name, name)


def _load_images(args):
    return load_image_dataset(args.data, args.layout)


def cmd_swissroll(args):
    pts = swiss_roll(SwissRollSpec(n=args.n, noise=args.noise, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "points.csv", pts, ["x", "y", "z"])
    write_distance_csv(out / "geodesic.csv", geodesic_distance_matrix(pts, args.knn))
    print(out / "geodesic.csv")


def cmd_distmat(args):
    data = _load_images(args)
    if args.measure == "euclidean":
        d = euclidean_matrix(np.stack([im.ravel() for im in data.images]))
    elif args.measure == "imed":
        d = imed_matrix_batch(data.stack(), params=ImedParams(args.sigma))
    else:
        pipe = SpmPipeline(args.vocab_size, args.levels, seed=args.seed)
        descs = pipe.describe(data.images)
        if args.vocab:
            pipe.vocabulary = read_vocabulary(args.vocab)
        else:
            pipe.fit(descs)
        k = similarity_matrix(pipe.vectors(descs))
        d = spm1_distance(k) if args.measure == "spm1" else spm2_distance(k, args.epsilon)
        np.fill_diagonal(d, 0.0)
    write_distance_csv(args.out, d)
    print(args.out)


def cmd_fit(args):
    d = read_distance_csv(args.distances)
    opts = IlmaOptions(max_sweeps=args.sweeps, tolerance=args.tolerance, strategy=_strategy(args.strategy), seed=args.seed)
    if len(args.dims) != 1:
        raise InvalidArgumentError("fit takes a single --dims value")
    emb, trace = ilma_fit(d, args.dims[0], opts)
    write_embedding_csv(args.out, emb.codes)
    if args.trace:
        write_trace_csv(args.trace, trace)
    print(f"raw_stress={emb.raw_stress:.6g} stress1={emb.stress1:.6g} sweeps={len(trace) - 1}")


def cmd_encode(args):
    codes = read_embedding_csv(args.embedding)
    rows = np.loadtxt(args.rows, delimiter=",", ndmin=2)
    if rows.shape[1] != codes.shape[0]:
        raise InvalidArgumentError(f"distance rows have {rows.shape[1]} columns, embedding has {codes.shape[0]} items")
    write_embedding_csv(args.out, encode_batch(codes, rows))
    print(args.out)


def cmd_spm_vocab(args):
    data = _load_images(args)
    pipe = SpmPipeline(args.vocab_size, args.levels, args.step, args.patch, args.seed)
    pipe.fit(pipe.describe(data.images))
    write_vocabulary(args.out, pipe.vocabulary)
    print(args.out)


def cmd_spm_vectors(args):
    data = _load_images(args)
    pipe = SpmPipeline(levels=args.levels, step=args.step, patch=args.patch)
    pipe.vocabulary = read_vocabulary(args.vocab)
    vecs = pipe.vectors(pipe.describe(data.images))
    write_pyramid_batch(args.out, vecs, [Path(p).name for p in data.paths])
    print(args.out)


_OVERRIDES = ("method", "data", "layout", "dims", "seed", "sigma", "vocab_size", "levels", "epsilon",
              "sweeps", "strategy", "cache_dir", "out", "folds")


def cmd_eval(args):
    cfg = ExperimentConfig.from_json(args.config).to_dict() if args.config else ExperimentConfig().to_dict()
    for name in _OVERRIDES:
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = _strategy(v) if name == "strategy" else v
    config = ExperimentConfig.from_dict(cfg)
    run = run_experiment(config)
    print(run)


def cmd_bench(args):
    res = bench_swissroll(
        strategies=[_strategy(s) for s in args.strategies.split(",")], m=args.dims[0], sweeps=args.sweeps,
        repeats=args.repeats, n=args.n, knn=args.knn, seed=args.seed, smacof=not args.no_smacof, out=args.out,
    )
    for s in args.strategies.split(","):
        ms = res.mean_stress(_strategy(s))
        print(f"{_strategy(s)}: mean raw stress {ms[0]:.6g} (init) -> {ms[-1]:.6g} (sweep {len(ms) - 1})")
    print(res.out)


def build_parser():
    p = _Parser(prog="mdsfeat", description="MDS feature learning from pairwise distances.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    def images(sp):
        sp.add_argument("--data", required=True, help="image dataset root")
        sp.add_argument("--layout", choices=("uiuc", "class-per-directory"), default="uiuc")

    sp = common(sub.add_parser("swissroll", help="generate the Swiss roll and its geodesic distances"))
    sp.add_argument("--n", type=int, default=591)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--knn", type=int, default=8)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_swissroll)

    sp = common(sub.add_parser("distmat", help="distance matrix of an image set"))
    images(sp)
    sp.add_argument("--measure", choices=("euclidean", "imed", "spm1", "spm2"), default="imed")
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--vocab", help="vocabulary CSV for spm measures (built from the images otherwise)")
    sp.add_argument("--vocab-size", type=int, default=200)
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--epsilon", type=float, default=0.001)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_distmat)

    sp = common(sub.add_parser("fit", help="ILMA embedding of a distance matrix CSV"))
    sp.add_argument("--distances", required=True)
    sp.add_argument("--dims", type=_dims, default=[2])
    sp.add_argument("--strategy", choices=STRATEGY_CHOICES, default="random")
    sp.add_argument("--sweeps", type=int, default=50)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--trace", help="also write the stress trace CSV here")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("encode", help="encode new items from their distances to the training items")
    sp.add_argument("--embedding", required=True)
    sp.add_argument("--rows", required=True, help="CSV, one row of distances to the training items per item")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_encode)

    spm = sub.add_parser("spm", help="spatial pyramid stages")
    spm_sub = spm.add_subparsers(dest="spm_command", required=True, parser_class=_Parser)
    sp = common(spm_sub.add_parser("vocab", help="build a visual vocabulary"))
    images(sp)
    sp.add_argument("--vocab-size", type=int, default=200)
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--step", type=int, default=8)
    sp.add_argument("--patch", type=int, default=16)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_spm_vocab)
    sp = spm_sub.add_parser("vectors", help="pyramid vectors for an image set")
    images(sp)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--step", type=int, default=8)
    sp.add_argument("--patch", type=int, default=16)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_spm_vectors)

    # flags default to None so that only explicitly given ones override the config file
    sp = sub.add_parser("eval", help="cross-validated car recognition run")
    sp.add_argument("--config", help="JSON config (or a previous run's manifest.json)")
    sp.add_argument("--method", help="comma-separated feature methods")
    sp.add_argument("--data")
    sp.add_argument("--layout", choices=("uiuc", "class-per-directory"))
    sp.add_argument("--dims", type=_dims)
    sp.add_argument("--folds", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--vocab-size", type=int)
    sp.add_argument("--levels", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--sweeps", type=int)
    sp.add_argument("--strategy", choices=STRATEGY_CHOICES)
    sp.add_argument("--cache-dir")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("bench", help="Swiss-roll solver benchmark"))
    sp.add_argument("--strategies", default="random,largest,smallest")
    sp.add_argument("--dims", type=_dims, default=[3])
    sp.add_argument("--sweeps", type=int, default=10)
    sp.add_argument("--repeats", type=int, default=20)
    sp.add_argument("--n", type=int, default=591)
    sp.add_argument("--knn", type=int, default=8)
    sp.add_argument("--no-smacof", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except MdsFeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
