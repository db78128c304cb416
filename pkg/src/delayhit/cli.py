"""Command-line front end.

Subcommands: gen-trace, simulate, sweep, validate-moments, report.
Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import MB, CacheConfig, LatencySpec, TraceError, parse_size
from .delay_model import LatencyModel, aggregate_delay_oracle, moments_for
from .engine import SimReport, simulate, with_improvements, write_report_csv
from .policies import POLICY_NAMES, parse_policy
from .tracegen import (ParseError, SyntheticSpec, dumps_trace, empirical_popularity, gen_synthetic,
                       load_trace, toy_trace, write_popularity_csv)

LATENCY_KINDS = {"exp": "exponential", "exponential": "exponential",
                 "det": "deterministic", "deterministic": "deterministic"}
SWEEP_AXES = ("omega", "window", "cache_size", "base_latency")
MOMENT_FIELDS = ["lambda", "z", "model", "analytic_mean", "analytic_var", "mc_mean", "mc_var",
                 "se_mean", "se_var", "n_samples"]


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _policies(text: str) -> list[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    try:
        return [parse_policy(n).value for n in names]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size(text: str) -> int:
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _latency_kind(text: str) -> str:
    try:
        return LATENCY_KINDS[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"latency must be one of {', '.join(LATENCY_KINDS)}") from None


def _count(text: str) -> int:
    # accepts 10000, 10K, 1e6
    t = text.strip().upper()
    mult = 1
    if t.endswith("K"):
        t, mult = t[:-1], 1000
    elif t.endswith("M"):
        t, mult = t[:-1], 10**6
    value = float(t) * mult
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def _add_synthetic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objects", type=int, default=100)
    p.add_argument("--requests", type=_count, default=100_000)
    p.add_argument("--arrival", choices=["poisson", "pareto"], default="poisson")
    p.add_argument("--zipf-alpha", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=1.0, help="total requests per ms")
    p.add_argument("--pareto-shape", type=float, default=1.5)
    p.add_argument("--size-min", type=_size, default=1 * MB)
    p.add_argument("--size-max", type=_size, default=100 * MB)


def _add_cache_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache", type=_size, default=500 * MB, help="capacity, e.g. 500MB")
    p.add_argument("--latency", type=_latency_kind, default="exponential", help="exp | det")
    p.add_argument("--L", dest="base_latency", type=float, default=5.0, help="constant miss latency, ms")
    p.add_argument("--c", dest="per_byte", type=float, default=None,
                   help="ms per byte (default L / 1e8)")
    p.add_argument("--window", type=_count, default=10_000)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--cala-weight", type=float, default=0.5)
    p.add_argument("--mad-alpha", type=float, default=0.5)
    p.add_argument("--admission", choices=["always", "compete", "never"], default="always")
    p.add_argument("--seed", type=int, default=0)


def _spec_from(args, seed: int) -> SyntheticSpec:
    return SyntheticSpec(n_objects=args.objects, n_requests=args.requests, zipf_alpha=args.zipf_alpha,
                         arrival=args.arrival, rate=args.rate, pareto_shape=args.pareto_shape,
                         size_min=args.size_min, size_max=args.size_max, seed=seed)


def _config_from(args, policy: str, seed: int, **overrides) -> CacheConfig:
    fields = dict(
        capacity=args.cache, policy=policy, window_size=args.window, omega=args.omega,
        latency=LatencySpec(args.latency, args.base_latency, args.per_byte), rng_seed=seed,
        cala_weight=args.cala_weight, mad_alpha=args.mad_alpha, admission=args.admission,
    )
    base_latency = overrides.pop("base_latency", None)
    if base_latency is not None:
        fields["latency"] = LatencySpec(args.latency, base_latency, args.per_byte)
    fields.update(overrides)
    return CacheConfig(**fields)


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def cmd_gen_trace(args) -> int:
    if args.toy:
        trace = toy_trace(args.toy, size=args.toy_size)
    else:
        trace = gen_synthetic(_spec_from(args, args.seed))
    Path(args.output).write_text(dumps_trace(trace), encoding="utf-8", newline="\n")
    rows = empirical_popularity(trace)
    top = ", ".join(f"{r['object_id']}:{r['count']}" for r in rows[:5])
    print(f"wrote {len(trace)} requests for {len(rows)} objects to {args.output}; top objects {top}")
    return 0


def cmd_simulate(args) -> int:
    trace = load_trace(args.trace)
    reports = [simulate(trace, _config_from(args, pol, args.seed)) for pol in args.policy]
    if "lru" in args.policy:
        with_improvements(reports)
    _write(write_report_csv(reports), args.output)
    if args.detail:
        Path(args.detail).write_text("\n".join(r.detail_json() for r in reports) + "\n", encoding="utf-8")
    return 0


@lru_cache(maxsize=8)
def _sweep_trace(trace_path: str | None, spec: SyntheticSpec):
    if trace_path:
        return load_trace(trace_path)
    return gen_synthetic(spec)


def _axis_override(axis: str, value: float) -> dict:
    if axis == "omega":
        return {"omega": value}
    if axis == "window":
        return {"window_size": int(value)}
    if axis == "cache_size":
        return {"capacity": int(value)}
    return {"base_latency": value}


def _sweep_task(task) -> SimReport:
    args, axis, value, policy, rep, seed = task
    trace = _sweep_trace(args.trace, _spec_from(args, seed))
    cfg = _config_from(args, policy, seed, **_axis_override(axis, value))
    report = simulate(trace, cfg)
    report.episodes = []
    report.extra = {"axis": axis, "value": repr(float(value)), "rep": rep}
    return report


def cmd_sweep(args) -> int:
    if args.axis in ("window", "cache_size"):
        convert = _size if args.axis == "cache_size" else _count
        values = [float(convert(v)) for v in args.values.split(",") if v.strip()]
    else:
        values = _floats(args.values)
    if not values:
        raise UsageError("--values must not be empty")
    tasks = [(args, args.axis, v, pol, rep, args.seed + rep)
             for v in values for pol in args.policy for rep in range(args.reps)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_sweep_task, tasks))
    else:
        reports = [_sweep_task(t) for t in tasks]
    if "lru" in args.policy:
        groups: dict = {}
        for r in reports:
            groups.setdefault((r.extra["value"], r.extra["rep"]), []).append(r)
        for group in groups.values():
            with_improvements(group)
    order = {p: i for i, p in enumerate(args.policy)}
    reports.sort(key=lambda r: (float(r.extra["value"]), order[parse_policy(r.policy).value], r.extra["rep"]))
    _write(write_report_csv(reports, extra=("axis", "value", "rep")), args.output)
    return 0


def validate_moments_rows(lambdas, zs, models, n: int, seed: int, rel_var_tol: float = 0.05,
                          se_tol: float = 3.0) -> tuple[list[dict], list[dict]]:
    """Analytic vs Monte Carlo moment rows, plus the subset that fails tolerance."""
    rows, failed = [], []
    rng_root = np.random.SeedSequence(seed)
    grid = [(m, lam, z) for m in models for lam in lambdas for z in zs]
    for (model, lam, z), child in zip(grid, rng_root.spawn(len(grid))):
        lm = LatencyModel(model, z)
        exact = moments_for(lam, lm)
        est = aggregate_delay_oracle(lam, lm, n, np.random.default_rng(child))
        row = {"lambda": repr(lam), "z": repr(z), "model": model,
               "analytic_mean": repr(exact.mean), "analytic_var": repr(exact.variance),
               "mc_mean": repr(est.mean), "mc_var": repr(est.variance),
               "se_mean": repr(est.se_mean), "se_var": repr(est.se_variance), "n_samples": n}
        rows.append(row)
        mean_ok = abs(est.mean - exact.mean) <= se_tol * est.se_mean
        if exact.variance == 0:
            var_ok = est.variance <= 1e-12
        else:
            var_ok = abs(est.variance - exact.variance) <= rel_var_tol * exact.variance
        if not (mean_ok and var_ok):
            failed.append(row)
    return rows, failed


def cmd_validate_moments(args) -> int:
    rows, failed = validate_moments_rows(args.lambdas, args.zs, args.models, args.n, args.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=MOMENT_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(buf.getvalue(), args.output)
    for row in failed:
        print(f"FAIL lambda={row['lambda']} z={row['z']} model={row['model']}: "
              f"mc_mean={row['mc_mean']} (analytic {row['analytic_mean']}), "
              f"mc_var={row['mc_var']} (analytic {row['analytic_var']})", file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args) -> int:
    _write(write_popularity_csv(empirical_popularity(load_trace(args.trace))), args.output)
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayhit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="write a synthetic trace CSV")
    _add_synthetic_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--toy", metavar="SEQUENCE", help="one request per ms from t=1, e.g. AAABAB")
    p.add_argument("--toy-size", type=int, default=10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("simulate", help="run policies over a trace")
    p.add_argument("trace")
    p.add_argument("--policy", type=_policies, default=["va-stoch", "lru"],
                   help=f"comma list of {' | '.join(POLICY_NAMES)}")
    _add_cache_flags(p)
    p.add_argument("-o", "--output")
    p.add_argument("--detail", help="write per-episode JSON lines here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep, long-format CSV")
    p.add_argument("--trace", help="trace CSV (default: synthetic trace per repetition seed)")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", help="comma list (default depends on axis)")
    p.add_argument("--policy", type=_policies, default=["lru", "va-stoch"])
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    _add_cache_flags(p)
    _add_synthetic_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-moments", help="closed-form vs Monte Carlo delay moments")
    p.add_argument("--lambdas", type=_floats, default=[0.1, 1.0, 5.0])
    p.add_argument("--zs", type=_floats, default=[0.5, 1.0, 4.0])
    p.add_argument("--models", type=lambda s: [_latency_kind(m) for m in s.split(",")],
                   default=["exponential", "deterministic"])
    p.add_argument("--n", type=_count, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_validate_moments)

    p = sub.add_parser("report", help="per-object popularity table for a trace")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


DEFAULT_SWEEP_VALUES = {"omega": "0,0.5,1,2", "window": "1K,10K,100K",
                        "cache_size": "250MB,500MB,1GB", "base_latency": "1,5,10,50"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        if args.reps < 1 or args.jobs < 1:
            parser.error("--reps and --jobs must be >= 1")
        if args.values is None:
            args.values = DEFAULT_SWEEP_VALUES[args.axis]
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (TraceError, ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
