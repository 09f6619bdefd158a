"""Command-line front end.

Every subcommand prints machine-readable ``key=value`` lines on stdout.
Exit codes: 0 success, 2 usage error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from typing import List, Optional

import numpy as np

from . import analysis
from .core import EstimatorKind, MachConfig, mach_train, predict
from .data_io import load_libsvm
from .evaluate import accuracies
from .hashing import HashKind, identity_spec, make_hash_family
from .persist import load_model, save_model, write_report
from .softmax import TrainConfig
from .synth import make_synthetic, truth_accuracy, write_synthetic

logger = logging.getLogger("mach")


class UsageError(Exception):
    pass


def _emit(stream, /, **items):
    stream.write(" ".join(f"{k}={_fmt(v)}" for k, v in items.items()) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _positive(name):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {v}")
        return v

    return parse


def _buckets(text):
    v = _positive("B")(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"B must be >= 2, got {v}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"value must lie in (0, 1), got {v}")
    return v


def _default_workers():
    env = os.environ.get("MACH_WORKERS")
    if env is None:
        return 1
    try:
        return _positive("MACH_WORKERS")(env)
    except argparse.ArgumentTypeError as e:
        raise UsageError(str(e))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mach", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp_):
        sp_.add_argument("--data", required=True, help="libsvm text file")
        sp_.add_argument("--one-based", action="store_true", help="feature ids start at 1")
        sp_.add_argument("--normalize", action="store_true", help="L2-normalise every row")

    t = sub.add_parser("train", help="train a MACH model")
    data_flags(t)
    t.add_argument("--B", type=_buckets, required=True, help="buckets per repetition")
    t.add_argument("--R", type=_positive("R"), required=True, help="number of repetitions")
    t.add_argument("--K", type=_positive("K"), help="class count; labels must be 0..K-1")
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("--hash", choices=["carter-wegman", "odd-multiplier"], default="carter-wegman")
    t.add_argument("--oaa", action="store_true",
                   help="one-vs-all: identity hash with B=K (requires R=1, B=K)")
    t.add_argument("--epochs", type=_positive("epochs"), default=10)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--decay", type=float, default=0.9)
    t.add_argument("--batch", type=_positive("batch"), default=64)
    t.add_argument("--shuffle-seed", type=_seed, default=0)
    t.add_argument("--workers", type=_positive("workers"), default=None,
                   help="parallel sub-model trainers (default $MACH_WORKERS or 1; capped at R)")
    t.add_argument("--out", required=True, help="model file to write")

    pr = sub.add_parser("predict", help="predict labels for a libsvm file")
    data_flags(pr)
    pr.add_argument("--model", required=True)
    pr.add_argument("--estimator", choices=[e.value for e in EstimatorKind], default="unbiased")
    pr.add_argument("--top-k", type=_positive("top-k"), default=1)
    pr.add_argument("--out", help="write one line of predicted labels per input here")

    ev = sub.add_parser("eval", help="top-1 accuracy on a labelled libsvm file")
    data_flags(ev)
    ev.add_argument("--model", required=True)
    ev.add_argument("--estimator", choices=[e.value for e in EstimatorKind], default="unbiased")
    ev.add_argument("--all-estimators", action="store_true",
                    help="score all three estimators from one meta-probability pass")
    ev.add_argument("--report", help="also write the key=value report to this file")

    pl = sub.add_parser("plan", help="repetitions needed so all class pairs are distinguishable")
    pl.add_argument("--K", type=_positive("K"), required=True)
    pl.add_argument("--B", type=_buckets, required=True)
    pl.add_argument("--delta", type=_unit_interval, required=True)

    au = sub.add_parser("audit", help="list indistinguishable class pairs of a hash family")
    src = au.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="audit the hash functions stored in a model file")
    src.add_argument("--K", type=_positive("K"), help="audit a freshly seeded family")
    au.add_argument("--B", type=_buckets)
    au.add_argument("--R", type=_positive("R"))
    au.add_argument("--seed", type=_seed, default=0)
    au.add_argument("--hash", choices=["carter-wegman", "odd-multiplier"], default="carter-wegman")
    au.add_argument("--max-pairs", type=int, default=20, help="pairs to list (0 lists none)")

    co = sub.add_parser("cost", help="parameter and multiply counts versus one-vs-all")
    co.add_argument("--K", type=_positive("K"), required=True)
    co.add_argument("--B", type=_buckets, required=True)
    co.add_argument("--R", type=_positive("R"), required=True)
    co.add_argument("--d", type=_positive("d"), required=True)

    sy = sub.add_parser("synth", help="write a synthetic dataset with known truth")
    sy.add_argument("--K", type=_positive("K"), required=True)
    sy.add_argument("--d", type=_positive("d"), required=True)
    sy.add_argument("--N", type=_positive("N"), required=True)
    sy.add_argument("--seed", type=_seed, default=0)
    sy.add_argument("--scale", type=float, default=5.0, help="ground-truth weight magnitude")
    sy.add_argument("--density", type=float, default=0.05, help="expected fraction of non-zeros per row")
    sy.add_argument("--support", type=_positive("support"), default=2,
                    help="features per class in the ground truth")
    sy.add_argument("--out", required=True)
    return p


def cmd_train(args, out):
    if args.oaa and args.R != 1:
        raise UsageError("--oaa needs --R 1")
    if args.hash == "odd-multiplier" and args.B & (args.B - 1):
        raise UsageError("--hash odd-multiplier needs a power-of-two --B")
    if not args.lr >= 0:
        raise UsageError("--lr must be non-negative")
    if not 0 < args.decay <= 1:
        raise UsageError("--decay must lie in (0, 1]")
    workers = args.workers if args.workers is not None else _default_workers()
    train = TrainConfig(args.epochs, args.batch, args.lr, args.decay, args.shuffle_seed)

    ds = load_libsvm(args.data, expected_K=args.K, one_based=args.one_based,
                     normalize=args.normalize)
    K = args.K if args.K is not None else ds.K
    if args.oaa and args.B != K:
        raise UsageError(f"--oaa needs --B equal to K={K}")
    cfg = MachConfig(K, args.B, args.R, args.seed, HashKind.parse(args.hash), train)
    specs = [identity_spec(K)] if args.oaa else None
    reports = []
    t0 = time.perf_counter()
    mm = mach_train(ds, cfg, workers=workers, specs=specs, reports=reports)
    for rep in reports:
        _emit(out, model=rep.index, wall_ms=round(rep.wall_ms, 3), final_loss=rep.final_loss)
    save_model(mm, args.out)
    cost = analysis.cost_report(K, args.B, args.R, mm.d)
    _emit(out, K=K, B=args.B, R=args.R, d=mm.d, N=ds.N, workers=min(workers, args.R),
          model_floats=cost.model_floats, bias_floats=cost.bias_floats,
          total_wall_ms=round((time.perf_counter() - t0) * 1e3, 3), out=args.out)


def _load_eval_data(args, mm):
    ds = load_libsvm(args.data, expected_d=mm.d, label_map=mm.label_map,
                     one_based=args.one_based, normalize=args.normalize)
    return ds


def cmd_predict(args, out):
    mm = load_model(args.model)
    ds = load_libsvm(args.data, expected_d=mm.d, one_based=args.one_based,
                     normalize=args.normalize)
    pred = predict(mm, ds.X, args.estimator, top_k=args.top_k)
    lines = [" ".join(str(int(mm.label_map[c])) for c in row) for row in pred.top_classes]
    if args.out:
        tmp = f"{args.out}.tmp"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write("".join(line + "\n" for line in lines))
        os.replace(tmp, args.out)
    else:
        for i, line in enumerate(lines):
            _emit(out, row=i, labels=line.replace(" ", ","))
    _emit(out, predicted=len(lines), estimator=args.estimator, top_k=pred.top_classes.shape[1])


def cmd_eval(args, out):
    mm = load_model(args.model)
    ds = _load_eval_data(args, mm)
    ests = list(EstimatorKind) if args.all_estimators else [EstimatorKind.parse(args.estimator)]
    acc = accuracies(mm, ds, ests)
    items = {"N": ds.N, "K": mm.config.K, "B": mm.config.B, "R": mm.config.R}
    if args.all_estimators:
        items.update({f"accuracy_{k}": v for k, v in acc.items()})
    else:
        items.update(estimator=ests[0].value, accuracy=acc[ests[0].value])
    _emit(out, **items)
    if args.report:
        write_report(args.report, items)


def cmd_plan(args, out):
    req = analysis.PlanRequest(args.K, args.B, args.delta)
    R = analysis.plan_R(req)
    _emit(out, K=args.K, B=args.B, delta=args.delta, R=R,
          union_bound=analysis.union_bound(args.K, args.B, R))


def cmd_audit(args, out):
    if args.model:
        mm = load_model(args.model)
        specs, K = mm.specs, mm.config.K
    else:
        if args.B is None or args.R is None:
            raise UsageError("audit --K also needs --B and --R")
        specs = make_hash_family(args.K, args.B, args.R, args.seed, args.hash)
        K = args.K
    pairs = analysis.audit_distinguishability(specs, K)
    R, B = len(specs), specs[0].buckets
    _emit(out, K=K, B=B, R=R, indistinguishable_pairs=len(pairs),
          expected_pairs=K * (K - 1) / 2 * float(B) ** -R)
    for i, j in pairs[: max(args.max_pairs, 0)]:
        _emit(out, pair=f"{i},{j}")


def cmd_cost(args, out):
    rep = analysis.cost_report(args.K, args.B, args.R, args.d)
    _emit(out, **{k: v for k, v in rep.as_dict().items()})


def cmd_synth(args, out):
    if not 0 < args.density <= 1:
        raise UsageError("--density must lie in (0, 1]")
    if args.support > args.d:
        raise UsageError("--support cannot exceed --d")
    data = make_synthetic(args.K, args.d, args.N, args.seed, args.scale, args.density,
                          args.support)
    truth_path = write_synthetic(data, args.out)
    _emit(out, K=args.K, d=args.d, N=args.N, seed=args.seed, out=args.out, truth=truth_path,
          truth_accuracy=truth_accuracy(data.truth, data.dataset),
          classes_present=int(np.unique(data.dataset.y).size))


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "plan": cmd_plan,
    "audit": cmd_audit,
    "cost": cmd_cost,
    "synth": cmd_synth,
}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"mach {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, FloatingPointError, OverflowError) as e:
        print(f"mach {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0
