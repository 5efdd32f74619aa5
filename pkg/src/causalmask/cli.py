"""Command-line front end.

Subcommands::

    gen      expert or fixture trajectories -> JSON Lines dataset + manifest
    mask     dataset -> mask JSON + dependence CSV
    train    dataset + mask -> policy JSON
    eval     policy -> per-rollout results CSV (+ per-seed summary CSV)
    verify   run a masking verification suite
    report   summarize results CSVs of several arms

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
All randomness derives from ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import cloning, envs, masking, scm
from . import rng as _rng
from .data import load_dataset, save_dataset


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _load(path):
    try:
        return load_dataset(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from None


# ----------------------------------------------------------------- commands

def cmd_gen(args):
    if args.n < 5:
        raise UsageError(f"--n must be >= 5, got {args.n}")
    if args.fixture:
        fx = scm.fixture(args.fixture)
        data = fx.dataset(args.n, args.init, args.seed)
    else:
        spec = envs.make_spec(args.env)
        data = envs.generate_dataset(spec, args.n, args.init, args.seed)
    save_dataset(data, args.out)
    print(f"wrote {data.N} trajectories (T={data.min_T}, dims={data.dims}) "
          f"to {args.out}")
    return 0


def cmd_mask(args):
    data = _load(args.data)
    cfg = masking.MaskConfig(args.horizon, args.gamma)
    if cfg.horizon > data.min_T:
        raise UsageError(f"--horizon {cfg.horizon} exceeds trajectory "
                         f"length {data.min_T}")
    mask, report = masking.compute_mask(data, cfg)
    masking.save_mask(mask, cfg, data.dims, args.out)
    if args.report:
        masking.save_report(report, args.report)
    print(f"mask {mask} masked={list(mask.masked)}")
    return 0


def _source_spec(manifest):
    source = manifest.get("source", "")
    if source in envs.ENVS:
        return envs.make_spec(source)
    return None


def _resolve_mask(arg, data):
    if arg == "none":
        return masking.ObservationMask.none(data.dims[1])
    if arg == "manual":
        spec = _source_spec(data.manifest)
        if spec is not None:
            return cloning.manual_mask(spec)
        source = data.manifest.get("source", "")
        if source.startswith("fixture:"):
            fx = scm.fixture(source.split(":", 1)[1])
            d_o = data.dims[1]
            return masking.ObservationMask(
                [i + 1 in fx.truth.nuisance_obs for i in range(d_o)])
        raise UsageError("--mask manual needs a dataset whose manifest names "
                         "an environment or fixture")
    path = Path(arg)
    if not path.is_file():
        raise UsageError(f"mask file {arg} not found")
    try:
        mask, _, dims = masking.load_mask(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read mask {arg}: {exc}") from None
    if tuple(dims) != tuple(data.dims):
        raise UsageError(f"mask dims {dims} do not match dataset dims {data.dims}")
    return mask


def cmd_train(args):
    data = _load(args.data)
    mask = _resolve_mask(args.mask, data)
    cfg = cloning.TrainConfig(kind=args.policy, lam=args.lam,
                              history=args.history, epochs=args.epochs,
                              seed=args.seed)
    try:
        model = cloning.train(data, mask, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model.hyperparameters["source"] = data.manifest.get("source", "")
    model.save(args.out)
    print(f"trained {cfg.kind} policy with mask {mask} "
          f"open-loop mse={cloning.open_loop_mse(model, data):.6g}")
    return 0


def cmd_eval(args):
    try:
        model = cloning.PolicyModel.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read model {args.model}: {exc}") from None
    env = args.env or model.hyperparameters.get("source")
    if env not in envs.ENVS:
        raise UsageError(f"unknown environment {env!r}; pass --env")
    spec = envs.make_spec(env)
    results = []
    for k in range(args.seeds):
        seed = _rng.child_seed(args.seed, _rng.TRIAL, k)
        try:
            results.append(cloning.evaluate(model, spec, args.rollouts, seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    cloning.save_results(results, args.out)
    summary = args.summary or str(Path(args.out).with_suffix("")) + ".summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "rollouts", "mean", "sd", "truncated"))
        for res in results:
            w.writerow((res.rng_seed, res.rollouts, repr(res.mean),
                        repr(res.std), int(res.truncated.sum())))
    means = np.array([r.mean for r in results])
    print(f"{env}: mean closed-loop loss {means.mean():.6g} "
          f"+- {means.std():.3g} over {args.seeds} seeds x {args.rollouts} rollouts")
    return 0


def cmd_verify(args):
    cfg = masking.MaskConfig(args.horizon, args.gamma)
    rep = masking.SUITES[args.suite](args.trials, args.n, args.seed, cfg)
    if args.out:
        Path(args.out).write_text(json.dumps({
            "suite": rep.suite, "trials": rep.trials, "n": rep.n,
            "violations": rep.violations, "passed": rep.passed,
            "summary": rep.summary, "details": rep.details}, indent=1) + "\n")
    print(rep)
    return 0 if rep.passed else 1


def cmd_report(args):
    arms = {}
    for item in args.results:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        try:
            by_seed = cloning.load_results(path)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot read results {path}: {exc}") from None
        arms[label] = np.array([by_seed[s].mean for s in sorted(by_seed)])
    rows = [(label, len(m), repr(float(m.mean())), repr(float(m.std())))
            for label, m in arms.items()]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("arm", "seeds", "mean", "sd"))
        w.writerows(rows)
    for label, k, mean, sd in rows:
        print(f"{label:>10}: {float(mean):12.6g} +- {float(sd):.3g} ({k} seeds)")
    if {"vanilla", "masked", "manual"} <= set(arms):
        man = arms["manual"].mean()
        print(f"masked/manual = {arms['masked'].mean() / man:.3g}, "
              f"vanilla/manual = {arms['vanilla'].mean() / man:.3g}")
    return 0


# ------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(
        prog="causalmask",
        description="Mask spuriously correlated observations before "
                    "behavior cloning.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a trajectory dataset")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--env", choices=sorted(envs.ENVS))
    src.add_argument("--fixture", choices=scm.FIXTURES)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--init", choices=envs.INIT_MODES, default="intervened")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("mask", help="compute the observation mask")
    m.add_argument("--data", required=True)
    m.add_argument("--horizon", type=_positive_int, default=3)
    m.add_argument("--gamma", type=_positive_float, default=1e-3)
    m.add_argument("--out", required=True, help="mask JSON path")
    m.add_argument("--report", help="dependence CSV path")
    m.set_defaults(func=cmd_mask)

    t = sub.add_parser("train", help="fit a behavior cloning policy")
    t.add_argument("--data", required=True)
    t.add_argument("--mask", default="none",
                   help="mask JSON path, 'manual' or 'none'")
    t.add_argument("--policy", choices=(cloning.RIDGE, cloning.MLP),
                   default=cloning.RIDGE)
    t.add_argument("--lam", type=float, default=1e-3)
    t.add_argument("--history", type=_positive_int, default=2)
    t.add_argument("--epochs", type=_positive_int, default=30)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="closed-loop evaluation")
    e.add_argument("--model", required=True)
    e.add_argument("--env", choices=sorted(envs.ENVS))
    e.add_argument("--rollouts", type=_positive_int, default=25)
    e.add_argument("--seeds", type=_positive_int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="per-rollout CSV path")
    e.add_argument("--summary", help="per-seed CSV path")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", choices=sorted(masking.SUITES), required=True)
    v.add_argument("--trials", type=_positive_int, default=20)
    v.add_argument("--n", type=int, default=5000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--horizon", type=_positive_int, default=3)
    v.add_argument("--gamma", type=_positive_float, default=1e-3)
    v.add_argument("--out", help="JSON report path")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="summarize evaluation results")
    r.add_argument("--results", nargs="+", required=True,
                   help="LABEL=results.csv entries")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"causalmask {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
