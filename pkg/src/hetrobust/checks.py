"""Property suites re-runnable from the command line."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adversary import TwoPoint, bounded_lecam_outliers
from .profile import CorruptionProfile
from .weights import kkt_residual, oracle_solve, solve_optimal_weights

C_VALUES = (0.5, 3.0, 10.0)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    worst: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.limit


def kkt_suites(n: int, cases: int, seed) -> list[SuiteResult]:
    """Closed-form weights against the projected-gradient oracle on uniform profiles."""
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    worst_gap = 0.0
    worst_sum = 0.0
    for i in range(cases):
        c = C_VALUES[i % len(C_VALUES)]
        profile = CorruptionProfile.from_values(rng.random(n))
        w = solve_optimal_weights(profile, c, check=False)
        ref = oracle_solve(profile, c)
        a, b = w.objective(c), ref.objective(c)
        worst_res = max(worst_res, kkt_residual(w, c))
        worst_gap = max(worst_gap, abs(a - b) / b)
        worst_sum = max(worst_sum, abs(math.fsum(w.weights) - 1.0))
    return [
        SuiteResult("kkt_residual", cases, worst_res, 1e-10),
        SuiteResult("oracle_objective_rel_gap", cases, worst_gap, 1e-9),
        SuiteResult("weight_sum_error", cases, worst_sum, 1e-12),
    ]


def lecam_sign_mean(lam: float, delta: float, hypothesis: int, m: int, rng) -> float:
    """Empirical mean of the corrupted sign over m draws at rate ``lam``."""
    clean = TwoPoint(r=1.0, p=0.5 - hypothesis * delta)
    z = clean.sample(rng, m)[:, 0]
    flags = rng.random(m) < lam
    z[flags] = bounded_lecam_outliers(np.full(int(flags.sum()), lam), delta, 1.0, hypothesis, rng)[:, 0]
    return float(z.mean())


def mixture_suite(cases: int, seed, draws: int = 100_000) -> SuiteResult:
    """Above the rate 2 delta / (1 + 2 delta) the corrupted sign is Ber(1/2) under both hypotheses."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        delta = rng.uniform(0.01, 0.25)
        lam = rng.uniform(2 * delta / (1 + 2 * delta), 1.0)
        for h in (1, -1):
            worst = max(worst, abs(lecam_sign_mean(lam, delta, h, draws, rng)) * math.sqrt(draws))
    # scaled by sqrt(m): the limit 3 is three standard deviations of a fair sign
    return SuiteResult("lecam_sign_mean_x_sqrt_m", cases, worst, 3.0)
