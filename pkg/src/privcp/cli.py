"""Command-line entry point.

Exit codes: 0 success, 2 configuration or domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bounds, harness
from . import rng as streams
from .conformal import MechanismParams, run_mechanism
from .errors import DomainError
from .privacy import PrivacyBudget
from .quantile import DEFAULT_PRECISION, MECHANISMS, ScoreSet, pcoqs_quantile

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _read_scores(path) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read scores from {path}: {exc.strerror or exc}") from exc
    values = []
    for i, ln in enumerate(lines):
        cell = ln.split(",")[0].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if i == 0:
                continue  # header
            raise DomainError(f"{path}:{i + 1}: not a number: {cell!r}") from None
    return np.asarray(values)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get("PCOQS_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise DomainError(f"PCOQS_SEED must be an integer, got {raw!r}") from None


def cmd_quantile(args) -> int:
    scores = ScoreSet(_read_scores(args.scores), args.lower, args.upper)
    params = MechanismParams(
        precision=args.precision,
        inclusive_loop=args.inclusive_loop,
        skip_past_mid=args.skip_past_mid,
        release_right_end=args.release_right_end,
        n_bins=args.n_bins,
        inflation=args.inflation,
    )
    budget = PrivacyBudget.from_rho(args.rho) if args.rho is not None else None
    rng = streams.stream(_seed(args), 0)
    if args.method == "pcoqs":
        if budget is None:
            raise DomainError("--rho is required for pcoqs")
        q = pcoqs_quantile(
            scores,
            args.alpha,
            args.precision,
            budget.rho,
            rng,
            inclusive_loop=args.inclusive_loop,
            skip_past_mid=args.skip_past_mid,
            release_right_end=args.release_right_end,
            record_trace=True,
        )
    else:
        q = run_mechanism(scores, args.alpha, args.method, budget, params, rng)
    out = {
        "threshold": q.threshold,
        "mechanism": q.mechanism,
        "target_rank": q.target_rank,
        "iterations_used": q.iterations_used,
        "noise_sd": q.noise_sd,
        "n_cal": len(scores),
        "seed": _seed(args),
    }
    if q.n_bins is not None:
        out.update(n_bins=q.n_bins, inflation=q.inflation)
    if q.trace:
        out["trace"] = [{"mid": m, "noisy_count": c, "moved_right": bool(r)} for m, c, r in q.trace]
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _output(rows, args) -> None:
    if args.out:
        harness.emit(rows, args.format, args.out)
    else:
        sys.stdout.write(harness.render(rows, args.format))


def _config(args) -> harness.ExperimentConfig:
    return harness.load_config(args.config, args.set or (), env=os.environ)


def cmd_simulate(args) -> int:
    _output(harness.run_experiment(_config(args)), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v.strip()]
    try:
        values = [float(v) for v in values]
    except ValueError as exc:
        raise DomainError(f"--values must be numbers: {exc}") from None
    _output(harness.sweep(_config(args), args.axis, values), args)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = [harness.bench_timing(cfg.with_overrides({"method": m})) for m in methods]
    _output(rows, args)
    return EXIT_OK


def cmd_bounds(args) -> int:
    tau = bounds.rank_error_bound(args.u, args.rho, args.beta)
    lo, hi = bounds.coverage_bounds(tau, args.ncal, args.alpha)
    print(json.dumps({"tau": tau, "coverage_lower": lo, "coverage_upper": hi}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privcp", description="Differentially private conformal prediction")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantile", help="release a conformal threshold from a column of scores")
    q.add_argument("--scores", required=True, help="CSV file, first column holds scores")
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--method", choices=MECHANISMS, default="pcoqs")
    q.add_argument("--rho", type=float, help="zCDP budget; exponq uses the matching pure epsilon")
    q.add_argument("--precision", type=float, default=DEFAULT_PRECISION)
    q.add_argument("--seed", type=int, help="defaults to $PCOQS_SEED or 0")
    q.add_argument("--lower", type=float, default=0.0)
    q.add_argument("--upper", type=float, default=1.0)
    q.add_argument("--n-bins", type=int, help="exponq bin count (tuned if omitted)")
    q.add_argument("--inflation", type=float, help="exponq rank inflation (tuned if omitted)")
    q.add_argument("--inclusive-loop", action="store_true", help="pcoqs: run N+1 search steps")
    q.add_argument("--skip-past-mid", action="store_true", help="pcoqs: move left to mid + precision on a low count")
    q.add_argument("--release-right-end", action="store_true", help="pcoqs: return the right end of the final interval")
    q.set_defaults(func=cmd_quantile)

    def experiment_args(sp):
        sp.add_argument("--config", required=True, help="flat JSON experiment config")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", help="output file (default: stdout)")

    s = sub.add_parser("simulate", help="run one replicated experiment")
    experiment_args(s)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run an experiment per value of one parameter")
    experiment_args(w)
    w.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    w.add_argument("--values", required=True, help="comma-separated values")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="time the quantile mechanisms")
    experiment_args(b)
    b.add_argument("--methods", default="pcoqs,exponq")
    b.set_defaults(func=cmd_bench)

    bd = sub.add_parser("bounds", help="rank-error bound and coverage band")
    bd.add_argument("--u", type=float, required=True, help="(b - a) / precision")
    bd.add_argument("--rho", type=float, required=True)
    bd.add_argument("--beta", type=float, required=True)
    bd.add_argument("--ncal", type=int, required=True)
    bd.add_argument("--alpha", type=float, required=True)
    bd.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
