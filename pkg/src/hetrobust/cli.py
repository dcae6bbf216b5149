"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 estimation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import checks
from .adversary import PowerLawProfile, ExplicitProfile, Scenario, contaminate
from .bench import ConfigError, load_config, rate_overlay, run_experiment
from .estimators import (
    SearchBudget,
    baselines,
    ols,
    weighted_mean,
    weighted_regression_coefficient,
    weighted_tukey_median,
)
from .exceptions import DomainError, EmptySelectionError, SingularDesignError
from .io import CsvFormatError, load_dataset, load_profile, write_dataset, write_flags
from .profile import BOUNDED_MAP, gaussian_map, rate_functional
from .weights import DEFAULT_C, solve_optimal_weights, threshold_weights, uniform_weights, write_weights_csv

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

MEAN_METHODS = ("mean-optimal", "mean-threshold", "mean", "median", "tukey", "tukey-threshold", "tukey-optimal")
REGRESSION_METHODS = ("regression-depth", "regression-depth-threshold", "regression-depth-optimal", "ols")


class InputError(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in np.atleast_1d(v)) + "]"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int(np.random.SeedSequence().entropy % (2**63))
    print(f"seed: {seed}")
    return seed


def _threshold(value: str):
    if value == "auto":
        return value
    try:
        t = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {value!r}") from None
    if not 0.0 <= t <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return t


def _positive_int(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def cmd_estimate(args) -> int:
    data = load_dataset(args.data)
    method = args.method or ("mean-optimal" if data.mode == "mean" else "regression-depth-threshold")
    valid = MEAN_METHODS if data.mode == "mean" else REGRESSION_METHODS
    if method not in valid:
        raise InputError(f"method {method!r} does not apply to {data.mode} data; valid: {', '.join(valid)}")
    needs_seed = data.d >= 2 and method.startswith(("tukey", "regression-depth"))
    search = SearchBudget(
        directions=args.directions, starts=args.starts, rounds=args.rounds, seed=_seed(args) if needs_seed else 0
    )
    profile = data.profile
    k = 1.0 if method == "mean-threshold" else float(data.d)
    if method.endswith("-optimal"):
        w = solve_optimal_weights(profile, args.c)
    elif method.endswith("-threshold"):
        t = rate_functional(profile, k).argmin_threshold if args.t == "auto" else args.t
        w = threshold_weights(profile, t)
    else:
        w = uniform_weights(profile)

    if method in ("mean-optimal", "mean-threshold"):
        result = weighted_mean(data, w)
    elif method in ("mean", "median"):
        result = baselines(data)["sample_mean" if method == "mean" else "median"]
    elif method.startswith("tukey"):
        result = weighted_tukey_median(data, w, search)
    elif method == "ols":
        result = ols(data)
    else:
        result = weighted_regression_coefficient(data, w, search)

    print(f"method: {method}")
    print(f"estimate: {_vec(result.estimate)}")
    if result.achieved_depth is not None:
        print(f"depth: {_fmt(result.achieved_depth)}")
    print(f"effective_sample_size: {_fmt(w.effective_sample_size)}")
    print(f"included: {w.included_count} of {len(w)}")
    if args.weights_out:
        write_weights_csv(w, args.weights_out)
    return EXIT_OK


def _load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            return Scenario.from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.profile is not None:
        scenario = scenario.with_profile(ExplicitProfile(tuple(load_profile(args.profile).in_input_order())))
    elif args.q is not None:
        scenario = scenario.with_profile(PowerLawProfile(q=args.q, n=args.n))
    elif scenario.profile_source is None:
        raise InputError("scenario has no profile: pass --q/--n or --profile")
    data = contaminate(scenario, seed=_seed(args))
    write_dataset(data, args.out)
    if args.flags_out:
        write_flags(data, args.flags_out)
    print(f"wrote {data.n} {data.mode} samples (d={data.d}) to {args.out}")
    return EXIT_OK


def _resolve_config(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("hetrobust") / "configs" / (name if name.endswith(".json") else name + ".json")
    if bundled.is_file():
        return Path(str(bundled))
    raise InputError(f"config not found: {name}")


def cmd_bench(args) -> int:
    config = load_config(_resolve_config(args.config))
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["root_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    report = run_experiment(config)
    report.to_csv(args.out)
    if args.json:
        report.to_json(args.json)
    for spec in config.estimators:
        parts = []
        for r in report.rows:
            if r["estimator"] == spec.name and r["metric"] == report.rows[0]["metric"]:
                q = "-" if r["q"] is None else f"{r['q']:g}"
                parts.append(f"q={q}: {r['value']:.6g}")
        failed = sum(v for (q, name), v in report.failures.items() if name == spec.name)
        tail = f" (failures: {failed})" if failed else ""
        print(f"{spec.name} {report.rows[0]['metric']}  " + "  ".join(parts) + tail)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK


def cmd_rates(args) -> int:
    profile = load_profile(args.profile, args.inflation)
    tmap = BOUNDED_MAP if args.map == "bounded" else gaussian_map(args.d)
    k = args.k if args.k is not None else float(args.d if args.map == "gaussian" else 1)
    table = rate_overlay(profile, k=k, r=args.r, threshold_map=tmap)
    cert = table["certificate"]
    print(f"n: {table['n']}")
    print(f"f(lambda,{k:g}): {_fmt(table['f_k'])}")
    print(f"t_star: {_fmt(table['t_star'])}")
    print(f"included: {table['included']}")
    print(f"upper r^2 f(lambda,1): {_fmt(table['upper'])}")
    print(f"max lower bound: {_fmt(table['max_lower_bound'])}")
    print(f"delta_star ({cert.map_name}): {_fmt(cert.delta_star)}")
    print(f"n_below: {cert.n_below}  N_below: {cert.N_below}  degenerate: {str(cert.degenerate).lower()}")
    if args.curve_out:
        with open(args.curve_out, "w") as fh:
            fh.write("delta,lower_bound\n")
            for dl, v in table["lower_bound"]:
                fh.write(f"{_fmt(dl)},{_fmt(v)}\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.n < 2:
        raise InputError("--n must be >= 2")
    if args.cases < 1:
        raise InputError("--cases must be >= 1")
    seed = _seed(args)
    results = checks.kkt_suites(args.n, args.cases, seed)
    results.append(checks.mixture_suite(args.cases, seed, args.draws))
    print(f"{'suite':<28} {'cases':>5}  {'worst':>12}  {'limit':>8}  status")
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<28} {r.cases:>5}  {r.worst:>12.4e}  {r.limit:>8.1e}  {status}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetrobust", description="Robust estimation under per-sample corruption rates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a mean or regression coefficient from a CSV")
    p.add_argument("data", help="CSV with columns x1..xd,lambda or w1..wd,y,lambda")
    p.add_argument("--method", choices=MEAN_METHODS + REGRESSION_METHODS)
    p.add_argument("--c", type=float, default=DEFAULT_C, help="penalty of the reweighting objective (default 3)")
    p.add_argument("--t", type=_threshold, default="auto", help="corruption threshold or 'auto'")
    p.add_argument("--seed", type=int, help="seed for depth-search directions (d >= 2)")
    p.add_argument("--directions", type=_positive_int, default=SearchBudget.directions)
    p.add_argument("--starts", type=_positive_int, default=SearchBudget.starts)
    p.add_argument("--rounds", type=int, default=SearchBudget.rounds)
    p.add_argument("--weights-out", help="write index,lambda,weight CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="draw a contaminated dataset from a scenario JSON")
    p.add_argument("scenario")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--q", type=float, help="power-law profile shape (with --n)")
    src.add_argument("--profile", help="profile CSV/JSON")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--flags-out", help="diagnostic CSV of realised corruption flags")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a Monte-Carlo sweep from a JSON config")
    p.add_argument("config", help="config path or bundled name (e.g. regression_d2)")
    p.add_argument("--out", required=True, help="long-form CSV output")
    p.add_argument("--json", help="JSON summary output")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="override root_seed")
    p.add_argument("--workers", type=_positive_int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rates", help="rate functional, lower-bound curve and delta* for a profile")
    p.add_argument("profile")
    p.add_argument("--k", type=float)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--map", choices=("bounded", "gaussian"), default="bounded")
    p.add_argument("--d", type=_positive_int, default=1)
    p.add_argument("--inflation", type=float, default=1.0, help="multiply rates by this factor (>= 1)")
    p.add_argument("--curve-out", help="write delta,lower_bound CSV")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("verify", help="re-run solver and adversary property suites")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--draws", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EmptySelectionError, SingularDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (InputError, CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        # input files parsed fine, so a domain failure in estimate comes from the data itself
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME if args.command == "estimate" else EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
