"""Monte-Carlo harness: fixed corruption profile, repeated dataset draws.

For every value of the power-law shape q the profile is drawn once; then
``trials`` datasets are drawn with that profile and every estimator's
squared error is recorded. Seeds are derived from ``(root_seed, q, trial)``
so any subset of trials can be recomputed independently and in any order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import jsonschema
import numpy as np

from .adversary import PowerLawProfile, Scenario, contaminate
from .estimators import (
    Dataset,
    SearchBudget,
    baselines,
    ols,
    weighted_mean,
    weighted_regression_coefficient,
    weighted_tukey_median,
)
from .exceptions import DomainError
from .profile import (
    BOUNDED_MAP,
    CorruptionProfile,
    DeltaStarCertificate,
    delta_star,
    lecam_lower_bound,
    rate_functional,
)
from .weights import DEFAULT_C, WeightVector, solve_optimal_weights, threshold_weights, uniform_weights

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "ESTIMATOR_KINDS",
    "ConfigError",
    "EstimatorSpec",
    "ExperimentConfig",
    "TrialReport",
    "auto_threshold",
    "run_experiment",
    "sweep_q",
    "rate_overlay",
    "load_config",
]

REPORT_SCHEMA_VERSION = 1
CSV_COLUMNS = ["q", "estimator", "metric", "value", "stderr", "n", "trials", "seed"]

ESTIMATOR_KINDS = (
    "optimal_linear",
    "threshold",
    "tukey",
    "regression_depth",
    "sample_mean",
    "median",
    "ols",
)
WEIGHT_SCHEMES = ("uniform", "threshold", "optimal")


class ConfigError(DomainError):
    """Invalid experiment configuration; ``pointer`` is a JSON pointer to the culprit."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator of the sweep.

    ``threshold`` is the thresholded weighted mean; ``tukey`` and
    ``regression_depth`` take a weight scheme. ``t`` is a number or
    ``"auto"``, in which case t* minimises t^2 + k / N(t) with k = 1 for the
    linear estimators and k = d for the depth estimators.
    """

    kind: str
    c: float = DEFAULT_C
    t: Union[str, float] = "auto"
    weights: str = "uniform"
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigError(f"unknown estimator {self.kind!r}; valid names: {', '.join(ESTIMATOR_KINDS)}")
        if self.weights not in WEIGHT_SCHEMES:
            raise ConfigError(f"unknown weight scheme {self.weights!r}; valid: {', '.join(WEIGHT_SCHEMES)}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "optimal_linear":
            return f"optimal_linear(c={self.c:g})"
        if self.kind == "threshold":
            return f"threshold({_fmt_t(self.t)})"
        if self.kind in ("tukey", "regression_depth"):
            if self.weights == "threshold":
                return f"{self.kind}(threshold={_fmt_t(self.t)})"
            if self.weights == "optimal":
                return f"{self.kind}(optimal,c={self.c:g})"
            return f"{self.kind}(uniform)"
        return self.kind

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "optimal_linear" or self.weights == "optimal":
            doc["c"] = self.c
        if self.kind == "threshold" or self.weights == "threshold":
            doc["t"] = self.t
        if self.kind in ("tukey", "regression_depth"):
            doc["weights"] = self.weights
        if self.label:
            doc["label"] = self.label
        return doc


def _fmt_t(t) -> str:
    return t if isinstance(t, str) else f"t={t:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    estimators: tuple
    trials: int = 2000
    n: int = 1000
    q_grid: tuple = (None,)
    metrics: tuple = ("mse",)
    root_seed: int = 0
    sigma_norm: Optional[tuple] = None
    search: SearchBudget = SearchBudget()
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", "/trials")
        if self.n < 1:
            raise ConfigError("n must be >= 1", "/n")
        if len(self.q_grid) == 0:
            raise ConfigError("q grid must not be empty", "/q_grid")
        for i, m in enumerate(self.metrics):
            _metric_name(m, f"/metrics/{i}")
        modes = {"sample_mean": "mean", "median": "mean", "optimal_linear": "mean", "threshold": "mean",
                 "tukey": "mean", "ols": "regression", "regression_depth": "regression"}
        for i, spec in enumerate(self.estimators):
            if modes[spec.kind] != self.scenario.mode:
                raise ConfigError(f"estimator {spec.kind!r} does not apply to {self.scenario.mode} data", f"/estimators/{i}/kind")

    def to_dict(self) -> dict:
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "scenario": self.scenario.to_dict(),
            "n": self.n,
            "q_grid": list(self.q_grid),
            "trials": self.trials,
            "estimators": [e.to_dict() for e in self.estimators],
            "metrics": [m if isinstance(m, str) else {"quantile": m[1]} for m in self.metrics],
            "root_seed": self.root_seed,
            "sigma_norm": None if self.sigma_norm is None else [list(r) for r in self.sigma_norm],
            "search": {"directions": self.search.directions, "starts": self.search.starts,
                       "rounds": self.search.rounds, "seed": self.search.seed},
        }
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _metric_name(m, pointer: str = "/metrics") -> str:
    if m in ("mse", "bias"):
        return m
    if isinstance(m, tuple) and len(m) == 2 and m[0] == "quantile":
        if not 0.0 < m[1] < 1.0:
            raise ConfigError("quantile level must lie in (0, 1)", pointer)
        return f"quantile({m[1]:g})"
    raise ConfigError(f"unknown metric {m!r}", pointer)


def auto_threshold(profile: CorruptionProfile, k: float) -> float:
    return rate_functional(profile, k).argmin_threshold


def _weights_for(spec: EstimatorSpec, profile: CorruptionProfile, d: int) -> Optional[WeightVector]:
    if spec.kind == "optimal_linear":
        return solve_optimal_weights(profile, spec.c)
    if spec.kind == "threshold":
        t = auto_threshold(profile, 1.0) if spec.t == "auto" else float(spec.t)
        return threshold_weights(profile, t)
    if spec.kind in ("tukey", "regression_depth"):
        if spec.weights == "threshold":
            t = auto_threshold(profile, float(d)) if spec.t == "auto" else float(spec.t)
            return threshold_weights(profile, t)
        if spec.weights == "optimal":
            return solve_optimal_weights(profile, spec.c)
        return uniform_weights(profile)
    return None


def _estimate(spec: EstimatorSpec, data: Dataset, w: Optional[WeightVector], search: SearchBudget) -> np.ndarray:
    if spec.kind in ("optimal_linear", "threshold"):
        return weighted_mean(data, w).estimate
    if spec.kind == "tukey":
        return weighted_tukey_median(data, w, search).estimate
    if spec.kind == "regression_depth":
        return weighted_regression_coefficient(data, w, search).estimate
    if spec.kind == "ols":
        return ols(data).estimate
    return baselines(data)[spec.kind].estimate


def _q_key(q) -> int:
    if q is None:
        return 0
    return int.from_bytes(struct.pack(">d", float(q)), "big")


def _trial_seed(root: int, q, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([root, _q_key(q), trial + 1])


def _profile_seed(root: int, q) -> np.random.SeedSequence:
    return np.random.SeedSequence([root, _q_key(q), 0])


def _run_trials(config: ExperimentConfig, q, profile, weights, trial_ids):
    """Estimates (trials x estimators x d) and failure messages for ``trial_ids``."""
    d = config.scenario.dim
    est = np.full((len(trial_ids), len(config.estimators), d), np.nan)
    failures = []
    for row, trial in enumerate(trial_ids):
        data = contaminate(config.scenario, profile, seed=_trial_seed(config.root_seed, q, trial))
        for j, spec in enumerate(config.estimators):
            if isinstance(weights[j], Exception):
                failures.append((trial, j, str(weights[j])))
                continue
            try:
                est[row, j] = _estimate(spec, data, weights[j], config.search)
            except (DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
                failures.append((trial, j, str(exc)))
    return est, failures


@dataclass
class TrialReport:
    """Long-form results of a sweep.

    ``rows`` has one entry per (q, estimator, metric). ``errors`` keeps the
    per-trial squared errors and ``profiles`` the profile drawn for each q.
    """

    rows: list
    config_hash: str
    root_seed: int
    n: int
    trials: int
    failures: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)

    def value(self, q, estimator: str, metric: str) -> float:
        for r in self.rows:
            if r["q"] == q and r["estimator"] == estimator and r["metric"] == metric:
                return r["value"]
        raise KeyError((q, estimator, metric))

    def stderr(self, q, estimator: str, metric: str) -> float:
        for r in self.rows:
            if r["q"] == q and r["estimator"] == estimator and r["metric"] == metric:
                return r["stderr"]
        raise KeyError((q, estimator, metric))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([
                "" if r["q"] is None else repr(float(r["q"])),
                r["estimator"],
                r["metric"],
                repr(float(r["value"])),
                repr(float(r["stderr"])),
                self.n,
                self.trials,
                self.root_seed,
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        def num(x):
            return None if not math.isfinite(x) else x

        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config_hash": self.config_hash,
            "root_seed": self.root_seed,
            "n": self.n,
            "trials": self.trials,
            "rows": [dict(r, value=num(r["value"]), stderr=num(r["stderr"])) for r in self.rows],
            "failures": [
                {"q": q, "estimator": name, "count": count} for (q, name), count in self.failures.items()
            ],
            "profiles": [
                {"q": q, **_profile_summary(p)} for q, p in self.profiles.items()
            ],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _profile_summary(p: CorruptionProfile) -> dict:
    rv = rate_functional(p, 1.0)
    return {
        "mean_lambda": math.fsum(p.lambdas) / len(p),
        "t_star": rv.argmin_threshold,
        "included": rv.included_count,
        "rate": rv.value,
    }


def _fsum_mean(x: np.ndarray) -> float:
    return math.fsum(x) / x.shape[0]


def _metric_rows(metric, errs: np.ndarray, deviations: np.ndarray, sigma: Optional[np.ndarray]):
    """(name, value, stderr) for one metric over the finite trials."""
    name = _metric_name(metric)
    m = errs.shape[0]
    if m == 0:
        return name, math.nan, math.nan
    if metric == "mse":
        mean = _fsum_mean(errs)
        se = float(np.std(errs, ddof=1)) / math.sqrt(m) if m > 1 else math.nan
        return name, mean, se
    if metric == "bias":
        mean_dev = np.array([_fsum_mean(deviations[:, j]) for j in range(deviations.shape[1])])
        var = np.var(deviations, axis=0, ddof=1) / m if m > 1 else np.full(deviations.shape[1], np.nan)
        if sigma is None:
            value = math.sqrt(float(mean_dev @ mean_dev))
            se = math.sqrt(float(np.sum(var)))
        else:
            value = math.sqrt(float(mean_dev @ sigma @ mean_dev))
            se = math.sqrt(float(np.trace(sigma @ np.diag(var))))
        return name, value, se
    p = metric[1]
    srt = np.sort(errs)
    value = float(np.quantile(srt, p))
    # distribution-free: half the spread of the order statistics one binomial sd either side
    half = math.sqrt(m * p * (1.0 - p))
    lo = min(max(int(math.floor(m * p - half)), 0), m - 1)
    hi = min(max(int(math.ceil(m * p + half)), 0), m - 1)
    return name, value, 0.5 * float(srt[hi] - srt[lo])


def run_experiment(config: ExperimentConfig) -> TrialReport:
    """Run every q of ``config.q_grid``; failed estimates become NaN and are counted."""
    scenario = config.scenario
    truth = scenario.truth
    sigma = None
    if scenario.mode == "regression":
        sigma = np.array(config.sigma_norm) if config.sigma_norm is not None else scenario.clean.covariance
    report = TrialReport([], config.config_hash(), config.root_seed, config.n, config.trials)

    for q in config.q_grid:
        if q is None:
            if scenario.profile_source is None:
                raise ConfigError("scenario needs a profile when no q grid is given", "/scenario/profile")
            profile = scenario.profile_source.build(_profile_seed(config.root_seed, q))
        else:
            profile = PowerLawProfile(q=float(q), n=config.n).build(_profile_seed(config.root_seed, q))
        report.profiles[q] = profile
        weights = []
        for spec in config.estimators:
            try:
                weights.append(_weights_for(spec, profile, scenario.dim))
            except DomainError as exc:
                weights.append(exc)

        ids = list(range(config.trials))
        if config.workers > 1:
            chunks = [ids[i :: config.workers] for i in range(config.workers)]
            est = np.full((config.trials, len(config.estimators), scenario.dim), np.nan)
            failures = []
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_run_trials, config, q, profile, weights, c) for c in chunks]
                for chunk, fut in zip(chunks, futures):
                    part, fails = fut.result()
                    est[chunk] = part
                    failures.extend(fails)
        else:
            est, failures = _run_trials(config, q, profile, weights, ids)

        for j, spec in enumerate(config.estimators):
            dev = est[:, j, :] - truth
            if sigma is None:
                sq = np.einsum("ij,ij->i", dev, dev)
            else:
                sq = np.einsum("ij,jk,ik->i", dev, sigma, dev)
            finite = np.isfinite(sq)
            count = int(np.count_nonzero(~finite))
            if count:
                report.failures[(q, spec.name)] = count
            report.errors[(q, spec.name)] = sq
            report.estimates[(q, spec.name)] = est[:, j, :]
            for metric in config.metrics:
                name, value, se = _metric_rows(metric, sq[finite], dev[finite], sigma)
                report.rows.append({"q": q, "estimator": spec.name, "metric": name, "value": value, "stderr": se})
    return report


def sweep_q(template: ExperimentConfig, q_grid) -> TrialReport:
    grid = tuple(q_grid)
    if not grid:
        raise ConfigError("q grid must not be empty", "/q_grid")
    return run_experiment(replace(template, q_grid=grid))


def rate_overlay(profile: CorruptionProfile, k: float = 1.0, r: float = 1.0, deltas=None, threshold_map=BOUNDED_MAP) -> dict:
    """Theory curves for one profile.

    ``f_k`` is the rate functional at k, ``upper`` is r^2 f(lambda, 1), the
    ``lower_bound`` curve is the two-point bound clamped at zero over a delta
    grid in [0, 1/4], and ``certificate`` is the delta* crossing.
    """
    if deltas is None:
        deltas = np.linspace(0.0, 0.25, 251)
    curve = [(float(dl), max(0.0, lecam_lower_bound(profile, r, float(dl)))) for dl in deltas]
    cert: DeltaStarCertificate = delta_star(profile, threshold_map)
    fk = rate_functional(profile, k)
    f1 = rate_functional(profile, 1.0)
    return {
        "n": len(profile),
        "k": k,
        "r": r,
        "f_k": fk.value,
        "t_star": fk.argmin_threshold,
        "included": fk.included_count,
        "upper": r * r * f1.value,
        "lower_bound": curve,
        "max_lower_bound": max(v for _, v in curve),
        "certificate": cert,
    }


# ----------------------------------------------------------- config files

_SCHEMA = {
    "type": "object",
    "required": ["scenario", "estimators", "trials"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "scenario": {"type": "object", "required": ["clean", "adversary"]},
        "n": {"type": "integer", "minimum": 1},
        "q_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "trials": {"type": "integer", "minimum": 1},
        "root_seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "sigma_norm": {"type": ["array", "null"], "items": {"type": "array", "items": {"type": "number"}}},
        "metrics": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"enum": ["mse", "bias"]},
                    {
                        "type": "object",
                        "required": ["quantile"],
                        "additionalProperties": False,
                        "properties": {"quantile": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                    },
                ]
            },
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directions": {"type": "integer", "minimum": 1},
                "starts": {"type": "integer", "minimum": 1},
                "rounds": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "estimators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"type": "string"},
                    "c": {"type": "number", "minimum": 0},
                    "t": {"oneOf": [{"const": "auto"}, {"type": "number", "minimum": 0, "maximum": 1}]},
                    "weights": {"enum": list(WEIGHT_SCHEMES)},
                    "label": {"type": "string"},
                },
            },
        },
    },
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a config document and build the config, raising ConfigError with a JSON pointer."""
    for i, est in enumerate(doc.get("estimators", []) if isinstance(doc.get("estimators"), list) else []):
        kind = est.get("kind") if isinstance(est, dict) else None
        if kind is not None and kind not in ESTIMATOR_KINDS:
            raise ConfigError(
                f"unknown estimator {kind!r}; valid names: {', '.join(ESTIMATOR_KINDS)}", f"/estimators/{i}/kind"
            )
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, _pointer(exc.absolute_path)) from None
    try:
        scenario = Scenario.from_dict(doc["scenario"])
    except DomainError as exc:
        raise ConfigError(str(exc), "/scenario") from None
    metrics = tuple(m if isinstance(m, str) else ("quantile", float(m["quantile"])) for m in doc.get("metrics", ["mse"]))
    estimators = tuple(
        EstimatorSpec(
            kind=e["kind"],
            c=float(e.get("c", DEFAULT_C)),
            t=e.get("t", "auto") if e.get("t", "auto") == "auto" else float(e["t"]),
            weights=e.get("weights", "uniform"),
            label=e.get("label"),
        )
        for e in doc["estimators"]
    )
    q_grid = tuple(float(q) for q in doc["q_grid"]) if "q_grid" in doc else (None,)
    sigma = doc.get("sigma_norm")
    return ExperimentConfig(
        scenario=scenario,
        estimators=estimators,
        trials=int(doc["trials"]),
        n=int(doc.get("n", 1000)),
        q_grid=q_grid,
        metrics=metrics,
        root_seed=int(doc.get("root_seed", 0)),
        sigma_norm=None if sigma is None else tuple(tuple(float(v) for v in row) for row in sigma),
        search=SearchBudget(**doc.get("search", {})),
        workers=int(doc.get("workers", 1)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc)
