"""Command-line front end.

Exit codes: 0 on success, 1 when a validation or acceptance-style check
fails, 2 on usage errors.  Divergence of a run is an expected outcome, not an
error.  All summary lines are key=value pairs so scripts can assert on them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, harness
from ._backend import backend_name
from .errors import ConfigError
from .losses import LinearSample, LogSumExpLoss, LogSumExpSample, QuadraticRegressionLoss, RegularizedLoss
from .schedules import sample_at
from .tuners import max_stable_gamma

GRADCHECK_FAMILIES = ("quadratic-regression", "logsumexp", "regularized")


def _default_out() -> str:
    return os.environ.get("HT_OPT_OUT", ".")


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    if not os.path.exists(args.config):
        return _fail_usage(f"config file not found: {args.config}")
    try:
        config = harness.ExperimentConfig.from_file(args.config)
    except ConfigError as exc:
        return _fail_usage(str(exc))
    fmt = args.format
    if fmt is None:
        fmt = "json" if "json" in config.outputs and "csv" not in config.outputs else "csv"
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    trace = harness.run_experiment(config)
    path = os.path.join(out_dir, f"{config.name}.{fmt}")
    harness.export_trace(trace, path, fmt)
    if args.plot or "plot" in config.outputs:
        from .plotting import emit_plot
        emit_plot([trace], "loss-gap", os.path.join(out_dir, f"{config.name}.svg"))
    summary = harness.summarize_run(config, trace)
    print(f"name={config.name} final_gap={summary.final_gap:.17g} "
          f"diverged={str(not summary.stable).lower()} "
          f"lyapunov_violations={summary.lyapunov_violations} trace={path}")
    return 0


def cmd_validate(args) -> int:
    beta, gamma, mu = args.beta, args.gamma, args.mu
    ok = True
    if args.mode == "continuous":
        cond = beta > 2.0 * gamma > 0.0
        ok = cond
        print(f"check=beta-dominates expression='beta = {beta:.10g} > 2*gamma = {2*gamma:.10g} > 0' "
              f"result={'pass' if cond else 'fail'}")
        print(f"max_gamma={beta / 2.0:.17g} (strict bound, gamma must stay below it)")
    else:
        mode = "smooth" if args.mode == "smooth" else "strongly-convex"
        in_range = 0.0 < beta < 1.0
        print(f"check=beta-range expression='0 < beta = {beta:.10g} < 1' "
              f"result={'pass' if in_range else 'fail'}")
        if not in_range:
            print("max_gamma=undefined")
            print("validation=fail")
            return 1
        bound = max_stable_gamma(beta, mu, mode=mode)
        cond = 0.0 < gamma <= bound
        ok = cond
        name = "beta*(2-beta)/(8+beta)" if mode == "smooth" else "beta*(2-beta)/(16+beta+mu)"
        print(f"check=gamma-bound expression='0 < gamma = {gamma:.10g} <= {name} = {bound:.10g}' "
              f"result={'pass' if cond else 'fail'}")
        print(f"max_gamma={bound:.17g}")
    print(f"validation={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_reproduce(args) -> int:
    if args.figure not in harness.FIGURES:
        return _fail_usage(f"unknown figure {args.figure!r}; known: {', '.join(harness.FIGURES)}")
    out_dir = args.out
    summaries, traces = harness.reproduce_figure(args.figure, out_dir)
    print(f"figure={args.figure} out={out_dir} backend={backend_name()}")
    print(f"{'tuner':<14s} {'status':<10s} final_gap")
    for s in summaries:
        status = "stable" if s.stable else "diverged"
        print(f"{s.tuner:<14s} {status:<10s} {s.final_gap:.17g}")
    return 0


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        return _fail_usage("compare needs at least two configs")
    configs = []
    for path in args.configs:
        if not os.path.exists(path):
            return _fail_usage(f"config file not found: {path}")
        try:
            configs.append(harness.ExperimentConfig.from_file(path))
        except ConfigError as exc:
            return _fail_usage(str(exc))
    ref = configs[0].to_dict()
    for cfg in configs[1:]:
        other = cfg.to_dict()
        if other["loss"] != ref["loss"] or other["schedule"] != ref["schedule"]:
            return _fail_usage("compare needs configs sharing the same loss and schedule")
    os.makedirs(args.out, exist_ok=True)
    traces = [harness.run_experiment(c) for c in configs]
    results = []
    for cfg, trace in zip(configs, traces):
        if trace.hard_diverged or not analysis.classify_stability(trace, trace.theta_star).stable:
            results.append((cfg.name, None, "diverged"))
            continue
        hits = np.where(trace.gap <= args.epsilon)[0]
        if hits.size:
            results.append((cfg.name, int(hits[0]), str(int(hits[0]))))
        else:
            results.append((cfg.name, None, "not-reached"))
    for name, _, shown in results:
        print(f"name={name} iterations_to_epsilon={shown}")
    reached = [(n, it) for n, it, _ in results if it is not None]
    if reached:
        winner = min(reached, key=lambda pair: pair[1])
        print(f"winner={winner[0]} iterations={winner[1]}")
    else:
        print("winner=none")
    from .plotting import emit_plot
    emit_plot(traces, "loss-gap", os.path.join(args.out, "compare.svg"))
    return 0


def _gradcheck_case(family: str, rng):
    if family == "quadratic-regression":
        dim = int(rng.integers(1, 5))
        model = QuadraticRegressionLoss()
        sample = LinearSample(phi=rng.normal(0, 2, size=dim), y=float(rng.normal(0, 2)))
        theta = rng.normal(0, 3, size=dim)
    elif family == "logsumexp":
        dim = int(rng.integers(1, 4))
        model = LogSumExpLoss()
        sample = LogSumExpSample(a=float(rng.uniform(0.1, 2)), b=float(rng.uniform(0.5, 5)))
        theta = rng.uniform(-3, 3, size=dim)
    else:
        dim = int(rng.integers(1, 4))
        model = RegularizedLoss(LogSumExpLoss(), mu=float(rng.uniform(1e-4, 1.0)),
                                center=rng.normal(0, 2, size=dim))
        sample = LogSumExpSample(a=float(rng.uniform(0.1, 2)), b=float(rng.uniform(0.5, 5)))
        theta = rng.uniform(-3, 3, size=dim)
    return model, theta, sample


def cmd_gradcheck(args) -> int:
    if args.family not in GRADCHECK_FAMILIES:
        return _fail_usage(f"unknown family {args.family!r}; known: {', '.join(GRADCHECK_FAMILIES)}")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        model, theta, sample = _gradcheck_case(args.family, rng)
        err = analysis.finite_diff_gradient_check(model, theta, sample, h=1e-6)
        worst = max(worst, err)
    ok = worst < 1e-6
    print(f"family={args.family} samples={args.samples} max_rel_error={worst:.17g} "
          f"result={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hotuner",
        description="High-order tuner experiments, gain validation, and gradient checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=_default_out(), help="output directory (default: $HT_OPT_OUT or .)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--plot", action="store_true", help="also write an SVG of the loss gap")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check tuner gains against the stability conditions")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--mode", choices=("smooth", "strong", "continuous"), required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reproduce", help="run all tuners of a reference figure")
    p.add_argument("figure", help=f"one of {', '.join(harness.FIGURES)}")
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("compare", help="race configs sharing a loss and schedule")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of a loss family's gradient")
    p.add_argument("--family", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
