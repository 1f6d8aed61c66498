"""Command-line front end.

Subcommands: ``synth`` (make a synthetic tensor + ground truth), ``fit``
(run the decomposition), ``eval`` (cost / factor error of saved factors),
``surrogate-grid`` (loss-vs-majorizer surface CSV).  Exit codes: 0 ok,
2 usage error, 3 runtime failure.
"""

import argparse
import json
import os
import sys

from . import tensorfile as tf
from .bregman import parse_mirror
from .losses import DomainError, parse_loss
from .metrics import factor_mse, objective_cost
from .sampler import fresh_seed
from .solver import (
    IncompatiblePairError,
    SolverConfig,
    SolverError,
    smartcpd,
    validate_pair,
)
from .stepsize import jensen_generator, parse_schedule
from .surrogate import surrogate_grid_rows
from .synthdata import GeneratorSpec, gen_factors, observe, realized_snr_db

_CONSTRAINTS = {
    "unconstrained": "unconstrained",
    "nonneg": "nonneg_orthant",
    "simplex": "column_simplex",
}

TRACE_HEADER = "iter,samples,seconds,cost,mse,stationarity"


class UsageError(ValueError):
    pass


def _parse_ints(text):
    return tuple(int(p) for p in text.split(","))


def _parse_floats(text):
    return tuple(float(p) for p in text.split(","))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smartcpd",
        description="Fiber-sampled stochastic mirror descent CP decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic tensor with ground truth")
    p.add_argument("--shape", required=True, type=_parse_ints, metavar="I1,I2,...")
    p.add_argument("--rank", required=True, type=int)
    p.add_argument("--obs", default="none",
                   choices=["poisson", "bernoulli", "gamma", "gaussian", "none"])
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--a-max", type=float, default=0.5)
    p.add_argument("--heavy-frac", type=float, default=0.05)
    p.add_argument("--heavy-scale", type=float, default=10.0)
    p.add_argument("--simplex", action="store_true",
                   help="column-normalize the ground-truth factors")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="decompose a tensor file")
    p.add_argument("--from-manifest", default=None,
                   help="re-run a previous fit from its run_manifest.json")
    p.add_argument("--tensor", default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--loss", default="gen-kl",
                   help="euclidean | is | beta:B | gen-kl | poisson-exp | "
                        "bernoulli-odds | logistic")
    p.add_argument("--mirror", default="auto",
                   help="quadratic | neglog | entropy | power:C | auto")
    p.add_argument("--constraint", default="nonneg", choices=sorted(_CONSTRAINTS))
    p.add_argument("--schedule", default="adagrad:b=1e-5",
                   help="constant:ETA | sqrt:T=N | diminishing:eta0=..,alpha=.. | "
                        "adagrad:b=.. | jensen | mixed:switch_tol=..")
    p.add_argument("--batch-fibers", default="auto",
                   help="fibers per iteration; 'auto' = 2R")
    p.add_argument("--inner-iters", type=int, default=1)
    p.add_argument("--max-epochs", type=int, default=10)
    p.add_argument("--stop-tol", type=float, default=1e-3)
    p.add_argument("--eval-every", type=int, default=None,
                   help="extra trace rows every K iterations")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init", default=None, help="directory with mode_N.csv start")
    p.add_argument("--truth", default=None,
                   help="directory with truth_mode_N.csv for the trace MSE column")
    p.add_argument("--trace-stationarity", action="store_true")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate saved factors against a tensor")
    p.add_argument("--tensor", required=True)
    p.add_argument("--factors", required=True, help="directory with mode_N.csv")
    p.add_argument("--loss", default="gen-kl")
    p.add_argument("--truth", default=None, help="directory with truth_mode_N.csv")
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("surrogate-grid",
                       help="loss vs majorizer surfaces for the count loss")
    p.add_argument("--x", type=float, default=3.0)
    p.add_argument("--h", type=_parse_floats, default=(1.0, 1.0), metavar="H1,H2")
    p.add_argument("--anchor", type=_parse_floats, default=(5.0, 5.0), metavar="A1,A2")
    p.add_argument("--grid-min", type=float, default=0.5)
    p.add_argument("--grid-max", type=float, default=10.0)
    p.add_argument("--grid-points", type=int, default=20)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_surrogate_grid)

    return parser


def _resolve_seed(seed):
    if seed is None:
        seed = fresh_seed()
        print(f"seed: {seed}", file=sys.stderr)
    return int(seed)


def cmd_synth(args):
    seed = _resolve_seed(args.seed)
    obs = "bernoulli_odds" if args.obs == "bernoulli" else args.obs
    spec = GeneratorSpec(shape=args.shape, rank=args.rank, a_max=args.a_max,
                         heavy_frac=args.heavy_frac, heavy_scale=args.heavy_scale,
                         observation=obs, snr_db=args.snr_db,
                         simplex=args.simplex, seed=seed)
    truth = gen_factors(spec)
    observed = observe(truth, spec)
    os.makedirs(args.out, exist_ok=True)
    tf.write_tensor(os.path.join(args.out, "tensor.tns"), observed)
    tf.write_factors(args.out, truth, prefix="truth_mode")
    manifest = {
        "kind": "synth",
        "shape": list(spec.shape),
        "rank": spec.rank,
        "a_max": spec.a_max,
        "heavy_frac": spec.heavy_frac,
        "heavy_scale": spec.heavy_scale,
        "observation": spec.observation,
        "snr_db": spec.snr_db,
        "simplex": spec.simplex,
        "seed": seed,
    }
    if obs in ("gamma", "gaussian"):
        manifest["realized_snr_db"] = realized_snr_db(truth, observed)
    tf.write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _mirror_from_flags(loss, mirror_name, constraint_flag, schedule):
    constraint = _CONSTRAINTS[constraint_flag]
    if mirror_name == "auto":
        if schedule.kind in ("jensen", "mixed"):
            gen, c = jensen_generator(loss)
            name = gen if c is None else f"power:{c:g}"
        elif constraint == "column_simplex":
            name = "entropy"
        elif loss.m_domain == "nonnegative":
            name = "entropy"
        else:
            name = "quadratic"
    else:
        name = mirror_name
    return parse_mirror(name, constraint)


_FIT_MANIFEST_KEYS = ("tensor", "rank", "loss", "mirror", "constraint", "schedule",
                      "batch_fibers", "inner_iters", "max_epochs", "stop_tol",
                      "eval_every", "seed", "init", "truth", "trace_stationarity",
                      "out")


def cmd_fit(args):
    if args.from_manifest:
        saved = tf.read_manifest(args.from_manifest)
        for key in _FIT_MANIFEST_KEYS:
            if key in saved:
                setattr(args, key, saved[key])
    if args.tensor is None or args.rank is None or args.out is None:
        raise UsageError("fit needs --tensor, --rank and --out")
    seed = _resolve_seed(args.seed)
    args.seed = seed

    loss = parse_loss(args.loss)
    schedule = parse_schedule(str(args.schedule))
    mirror = _mirror_from_flags(loss, str(args.mirror), args.constraint, schedule)
    validate_pair(loss, mirror)
    batch = args.batch_fibers
    batch = None if batch in (None, "auto") else int(batch)

    tensor = tf.densify_if_small(tf.read_tensor(args.tensor))
    truth = None
    if args.truth:
        truth = tf.read_factors(args.truth, tensor.ndim, prefix="truth_mode")
    config = SolverConfig(loss=loss, mirror=mirror, schedule=schedule,
                          rank=args.rank, batch_fibers=batch,
                          inner_iters=args.inner_iters, max_epochs=args.max_epochs,
                          stop_tol=args.stop_tol, seed=seed,
                          eval_every=args.eval_every, truth=truth,
                          track_stationarity=args.trace_stationarity)
    init = None
    if args.init:
        init = tf.read_factors(args.init, tensor.ndim)

    os.makedirs(args.out, exist_ok=True)
    manifest = {"kind": "fit", "mirror": mirror.name}
    for key in _FIT_MANIFEST_KEYS:
        if key != "mirror":
            manifest[key] = getattr(args, key)
    tf.write_manifest(os.path.join(args.out, "run_manifest.json"), manifest)

    trace_path = os.path.join(args.out, "trace.csv")
    with open(trace_path, "w", buffering=1) as trace_file:
        trace_file.write(TRACE_HEADER + "\n")

        def on_record(rec):
            mse = "" if rec.mse is None else f"{rec.mse:.17g}"
            sta = "" if rec.stationarity is None else f"{rec.stationarity:.17g}"
            trace_file.write(f"{rec.iteration},{rec.samples},{rec.seconds:.6f},"
                             f"{rec.cost:.17g},{mse},{sta}\n")
            trace_file.flush()

        model, _ = smartcpd(tensor, config, init=init, on_record=on_record)

    tf.write_factors(args.out, model)
    return 0


def cmd_eval(args):
    tensor = tf.densify_if_small(tf.read_tensor(args.tensor))
    factors = tf.read_factors(args.factors, tensor.ndim)
    loss = parse_loss(args.loss)
    report = {"cost": objective_cost(tensor, factors, loss)}
    if args.truth:
        truth = tf.read_factors(args.truth, tensor.ndim, prefix="truth_mode")
        report["mse"] = factor_mse(factors, truth)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        tf.write_manifest(args.out, report)
    return 0


def cmd_surrogate_grid(args):
    rows = surrogate_grid_rows(x=args.x, h=args.h, anchor=args.anchor,
                               grid_min=args.grid_min, grid_max=args.grid_max,
                               grid_points=args.grid_points)
    with open(args.out, "w") as f:
        f.write("phi,a1,a2,loss,surrogate\n")
        for phi, a1, a2, lval, sval in rows:
            f.write(f"{phi},{a1:.17g},{a2:.17g},{lval:.17g},{sval:.17g}\n")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 2
    try:
        return args.func(args)
    except (SolverError, DomainError, OSError) as exc:
        # DomainError subclasses ValueError, so runtime failures come first
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except (UsageError, IncompatiblePairError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_entry():
    raise SystemExit(main())
