"""Acceptance checks, one pass/fail line per criterion.

Run under pytest, or directly with ``python tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction
from importlib import resources

import numpy as np
import pytest
from scipy import integrate, stats

from hetrobust.adversary import GaussianMax, Scenario, contaminate, ExplicitProfile, gaussian_max_outlier
from hetrobust.bench import load_config, run_experiment
from hetrobust.checks import lecam_sign_mean
from hetrobust.estimators import (
    Dataset,
    SearchBudget,
    make_query,
    weighted_regression_coefficient,
    weighted_tukey_depth,
    weighted_tukey_median,
)
from hetrobust.profile import CorruptionProfile, delta_star, rate_functional
from hetrobust.weights import kkt_residual, oracle_solve, solve_optimal_weights, threshold_weights, uniform_weights

_PRINT = print


def report(label: str, passed: bool, detail: str) -> None:
    _PRINT(f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}")


@pytest.fixture(autouse=True)
def _visible_report(capsys):
    # show the pass/fail lines in the normal pytest output
    global _PRINT
    def emit(line):
        with capsys.disabled():
            print("\n" + line, end="")
    _PRINT = emit
    yield
    _PRINT = print


def config(name):
    return load_config(resources.files("hetrobust") / "configs" / name)


# ---------------------------------------------------------------- 1


def test_c1_solver_matches_oracle():
    rng = np.random.default_rng(101)
    sizes = (10, 1_000, 10_000)
    penalties = (0.5, 3.0, 10.0)
    worst_gap = worst_res = 0.0
    start = time.perf_counter()
    for i in range(100):
        n = sizes[i % 3]
        c = penalties[(i // 3) % 3]
        p = CorruptionProfile.from_values(rng.random(n))
        w = solve_optimal_weights(p, c)
        ref = oracle_solve(p, c)
        worst_gap = max(worst_gap, abs(w.objective(c) - ref.objective(c)) / ref.objective(c))
        worst_res = max(worst_res, kkt_residual(w, c))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-9 and worst_res <= 1e-10 and elapsed <= 30
    report("C1a solver vs oracle", ok,
           f"max rel gap {worst_gap:.2e} (<=1e-9), max KKT residual {worst_res:.2e} (<=1e-10), {elapsed:.1f}s (<=30s)")
    assert ok


def test_c1_runtime_is_log_linear():
    rng = np.random.default_rng(102)
    sizes = np.array([10_000, 100_000, 1_000_000])
    times = []
    for n in sizes:
        values = rng.random(n)
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            solve_optimal_weights(CorruptionProfile.from_values(values), 3.0, check=False)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    times = np.array(times)
    x = sizes * np.log(sizes)
    a = float(x @ times / (x @ x))
    ratios = times / (a * x)
    ok = bool(np.all((ratios <= 3.0) & (ratios >= 1 / 3.0)))
    report("C1b n log n scaling", ok,
           "time/fit " + ", ".join(f"n={n}: {r:.2f}" for n, r in zip(sizes, ratios)) + " (within 3x)")
    assert ok


# ---------------------------------------------------------------- 2


def test_c2_hand_solve():
    w = solve_optimal_weights(CorruptionProfile.from_values([0.0, 1.0]), 3.0)
    ok = abs(w.weights[0] - 0.8) <= 1e-15 and abs(w.weights[1] - 0.2) <= 1e-15 and abs(w.objective(3.0) - 0.8) <= 1e-15
    report("C2 hand-verified solve", ok, f"w={w.weights.tolist()}, objective={w.objective(3.0)!r}")
    assert ok


# ---------------------------------------------------------------- 3


def test_c3_lecam_mixture_identity():
    rng = np.random.default_rng(103)
    m = 100_000
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        delta = rng.uniform(0.01, 0.25)
        lam = rng.uniform(2 * delta / (1 + 2 * delta), 1.0)
        for h in (1, -1):
            worst = max(worst, abs(lecam_sign_mean(lam, delta, h, m, rng)))
    elapsed = time.perf_counter() - start
    ok = worst <= 3 / math.sqrt(m) and elapsed <= 10
    report("C3 Le Cam mixture identity", ok,
           f"max |mean| {worst:.2e} (<= 3/sqrt(m) = {3 / math.sqrt(m):.2e}), {elapsed:.1f}s (<=10s)")
    assert ok


# ---------------------------------------------------------------- 4


def _corrupted_draws(tau, delta, lam, m, seed):
    adv = GaussianMax(delta=delta, tau=(tau,))
    sc = Scenario(adv.clean_law(), adv, ExplicitProfile((lam,) * m))
    return contaminate(sc, seed=seed).points[:, 0]


def _numeric_cdf(delta):
    # integrate the density on a grid, then interpolate
    grid = np.linspace(-9.0, 9.0, 3601)
    pdf = lambda x: stats.norm.pdf(abs(x) - delta) / (2 * stats.norm.cdf(delta))
    pieces = [integrate.quad(pdf, a, b)[0] for a, b in zip(grid[:-1], grid[1:])]
    head = integrate.quad(pdf, -np.inf, grid[0])[0]
    cum = head + np.concatenate([[0.0], np.cumsum(pieces)])
    return lambda x: np.interp(x, grid, cum, left=0.0, right=1.0)


def test_c4_gaussian_max_indistinguishable():
    delta, lam, m = 0.5, 0.9, 100_000
    start = time.perf_counter()
    plus = _corrupted_draws(1.0, delta, lam, m, 104)
    minus = _corrupted_draws(-1.0, delta, lam, m, 105)
    two = stats.ks_2samp(plus, minus)
    cdf = _numeric_cdf(delta)
    ks_plus = stats.kstest(plus, cdf).statistic
    ks_minus = stats.kstest(minus, cdf).statistic
    elapsed = time.perf_counter() - start
    ok = two.pvalue >= 0.01 and max(ks_plus, ks_minus) <= 0.01 and elapsed <= 20
    report("C4 Gaussian max-density adversary", ok,
           f"two-sample p={two.pvalue:.3f} (>=0.01), KS vs density {ks_plus:.4f}/{ks_minus:.4f} (<=0.01), "
           f"{elapsed:.1f}s (<=20s)")
    assert ok


# ---------------------------------------------------------------- 5


def test_c5_rate_functional_exact():
    rng = np.random.default_rng(105)
    grid = np.linspace(0.0, 1.0, 1_000_001)
    h = grid[1] - grid[0]
    start = time.perf_counter()
    worst_below = worst_above = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 400))
        lam = np.round(rng.random(n) ** rng.uniform(0.3, 3.0), int(rng.integers(2, 8)))
        k = float(rng.choice([1.0, 2.0, 5.0]))
        p = CorruptionProfile.from_values(lam)
        exact = rate_functional(p, k).value
        counts = np.searchsorted(p.lambdas, grid, side="right")
        with np.errstate(divide="ignore"):
            dense = float(np.min(np.where(counts > 0, k / counts, np.inf) + grid**2))
        worst_below = max(worst_below, exact - dense)
        worst_above = max(worst_above, dense - exact)
    homo = CorruptionProfile.from_values([0.1] * 250)
    exact_homo = rate_functional(homo, 3.0).value == 3.0 / 250 + 0.1 * 0.1
    elapsed = time.perf_counter() - start
    ok = worst_below <= 1e-12 and worst_above <= 2 * h + h * h and exact_homo and elapsed <= 20
    report("C5 rate functional", ok,
           f"exact-dense {worst_below:.1e} (<=0), dense-exact {worst_above:.1e} (<= grid step {2 * h:.1e}), "
           f"homogeneous exact {exact_homo}, {elapsed:.1f}s (<=20s)")
    assert ok


# ---------------------------------------------------------------- 6


def test_c6_delta_star_certificate():
    rng = np.random.default_rng(106)
    bad = 0
    for i in range(200):
        n = int(rng.integers(1, 300))
        lam = rng.random(n) ** rng.uniform(0.2, 5.0)
        if i % 10 == 0:
            lam = 0.5 + 0.5 * rng.random(n)
            lam[: int(rng.integers(0, 3))] = 0.1
        cert = delta_star(CorruptionProfile.from_values(lam))
        s = cert.delta_star_sq
        # independent exact recount: lambda <= 2 delta iff lambda^2 / 4 <= delta^2
        big_n = sum(1 for x in lam if Fraction(float(x)) ** 2 / 4 <= s)
        small_n = sum(1 for x in lam if Fraction(float(x)) ** 2 / 4 < s)
        degenerate = sum(1 for x in lam if x <= 0.5) <= 1
        if cert.degenerate != degenerate:
            bad += 1
        elif not cert.degenerate and not (12 * big_n * s >= 1 and 12 * small_n * s <= 1):
            bad += 1
        elif cert.degenerate and cert.delta_star != 0.25:
            bad += 1
    ok = bad == 0
    report("C6 delta* certificate", ok, f"{bad} of 200 profiles violate N(2d*) >= 1/(12d*^2) >= n(2d*) or the case split")
    assert ok


# ---------------------------------------------------------------- 7


@pytest.fixture(scope="module")
def bounded_report():
    cfg = config("bounded_appendixA.json")
    start = time.perf_counter()
    rep = run_experiment(cfg)
    return cfg, rep, time.perf_counter() - start


def test_c7a_sample_mean_bias(bounded_report):
    cfg, rep, elapsed = bounded_report
    parts, ok = [], elapsed <= 180
    for q in (2.0, 4.0, 8.0):
        mse = rep.value(q, "sample_mean", "mse")
        target = 1 / (q + 1) ** 2
        rel = abs(mse - target) / target
        ok &= rel <= 0.2
        parts.append(f"q={q:g}: {mse:.4f} vs {target:.4f} ({rel:.0%})")
    report("C7a sample-mean MSE ~ 1/(q+1)^2", ok, "; ".join(parts) + f" (<=20%), {elapsed:.1f}s (<=180s)")
    assert ok


def test_c7b_reweighting_beats_mean(bounded_report):
    cfg, rep, _ = bounded_report
    parts, ok = [], True
    for q in (2.0, 4.0, 8.0):
        base = rep.value(q, "sample_mean", "mse")
        opt = rep.value(q, "optimal_linear(c=3)", "mse")
        thr = rep.value(q, "threshold(auto)", "mse")
        ok &= opt <= base and thr <= base
        parts.append(f"q={q:g}: opt {opt:.2e}, thr {thr:.2e}, mean {base:.2e}")
    report("C7b optimal/threshold <= sample mean", ok, "; ".join(parts))
    assert ok


def test_c7c_threshold_within_bound(bounded_report):
    cfg, rep, _ = bounded_report
    parts, ok = [], True
    for q in cfg.q_grid:
        profile = rep.profiles[q]
        w = threshold_weights(profile, rate_functional(profile, 1.0).argmin_threshold)
        bound = 7 * (w.squared_norm + 3 * w.dot_lambda() ** 2)
        mse = rep.value(q, "threshold(auto)", "mse")
        ok &= mse <= bound
        parts.append(f"q={q:g}: {mse:.2e} <= {bound:.2e}")
    report("C7c threshold MSE <= 7(|w|^2 + 3(w.lambda)^2)", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 8


@pytest.fixture(scope="module")
def gaussian_report():
    cfg = config("gaussian_far_outliers.json")
    start = time.perf_counter()
    rep = run_experiment(cfg)
    return cfg, rep, time.perf_counter() - start


TUKEY = "tukey(threshold=auto)"
QUANT = "quantile(0.8)"


def test_c8a_tukey_beats_median(gaussian_report):
    cfg, rep, elapsed = gaussian_report
    parts, ok = [], elapsed <= 180
    for q in (2.0, 4.0, 8.0):
        med = rep.value(q, "median", QUANT)
        tk = rep.value(q, TUKEY, QUANT)
        ok &= tk <= med
        parts.append(f"q={q:g}: tukey {tk:.3g} vs median {med:.3g}")
    report("C8a threshold-Tukey Q0.8 <= median Q0.8", ok, "; ".join(parts) + f", {elapsed:.1f}s (<=180s)")
    assert ok


def test_c8b_agreement_at_small_q(gaussian_report):
    cfg, rep, _ = gaussian_report
    q = 0.5
    med, tk = rep.value(q, "median", QUANT), rep.value(q, TUKEY, QUANT)
    se = math.hypot(rep.stderr(q, "median", QUANT), rep.stderr(q, TUKEY, QUANT))
    ok = abs(med - tk) <= 3 * se
    report("C8b median and threshold-Tukey agree at q=0.5", ok,
           f"median {med:.4g} vs tukey {tk:.4g}, |diff| {abs(med - tk):.3g} vs 3 SE {3 * se:.3g}")
    assert ok


# ---------------------------------------------------------------- 9


def test_c9_depth_properties():
    rng = np.random.default_rng(109)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        z = np.round(rng.standard_normal(n), 1)
        lam = rng.random(n)
        data = Dataset(z, CorruptionProfile.from_values(lam))
        w = solve_optimal_weights(data.profile)
        wo = w.original
        eta = float(rng.choice(z)) if rng.random() < 0.5 else float(rng.normal())
        enum = min(math.fsum(wo[z >= eta]), math.fsum(wo[z <= eta]))
        if weighted_tukey_depth(data, w, make_query([eta], 1)) != enum:
            mismatches += 1

    pts = rng.standard_normal((200, 2))
    data2 = Dataset(pts, CorruptionProfile.from_values(rng.random(200)))
    w2 = solve_optimal_weights(data2.profile)
    monotone = True
    for _ in range(20):
        eta = rng.normal(size=2) * 0.5
        depths = [weighted_tukey_depth(data2, w2, make_query(eta, 2, m, seed=7)) for m in (2, 8, 32, 128, 512)]
        monotone &= all(a >= b for a, b in zip(depths, depths[1:]))

    z1 = Dataset(rng.standard_normal(101), CorruptionProfile.from_values(rng.random(101)))
    w1 = solve_optimal_weights(z1.profile)
    s1 = 0.375
    e1 = weighted_tukey_median(z1, w1).estimate[0]
    e1s = weighted_tukey_median(z1.shifted(s1), w1).estimate[0]
    exact_1d = e1s == e1 + s1
    shift = np.array([2.5, -4.0])
    budget = SearchBudget(seed=3)
    e2 = weighted_tukey_median(data2, w2, budget).estimate
    e2s = weighted_tukey_median(data2.shifted(shift), w2, budget).estimate
    err2 = float(np.max(np.abs(e2s - e2 - shift)))

    ok = mismatches == 0 and monotone and exact_1d and err2 <= 1e-6
    report("C9 depth correctness", ok,
           f"1-D mismatches {mismatches}/1000, d=2 monotone {monotone}, 1-D equivariance exact {exact_1d}, "
           f"d=2 equivariance error {err2:.1e} (<=1e-6)")
    assert ok


# ---------------------------------------------------------------- 10


def test_c10_regression():
    start = time.perf_counter()
    x = np.linspace(-3, 3, 61)
    x = x[x != 0]
    noiseless = Dataset(x[:, None], CorruptionProfile.from_values(np.zeros(x.size)), 2 * x)
    slope0 = weighted_regression_coefficient(noiseless, uniform_weights(noiseless.profile)).estimate[0]

    rng = np.random.default_rng(110)
    xc = rng.uniform(-2, 2, 200)
    yc = 3 * xc + rng.normal(0, 0.1, 200)
    xo = rng.uniform(-2, 2, 20)
    yo = -40 * xo + 50
    lam = np.r_[rng.uniform(0, 0.1, 200), rng.uniform(0.8, 1.0, 20)]
    data = Dataset(np.r_[xc, xo][:, None], CorruptionProfile.from_values(lam), np.r_[yc, yo])
    t = rate_functional(data.profile, 1.0).argmin_threshold
    slope = weighted_regression_coefficient(data, threshold_weights(data.profile, t)).estimate[0]

    cfg = config("regression_d2.json")
    rep = run_experiment(cfg)
    beats = all(
        rep.value(q, "regression_depth(threshold=auto)", "mse") < rep.value(q, "ols", "mse") for q in cfg.q_grid
    )
    elapsed = time.perf_counter() - start
    ok = abs(slope0 - 2) <= 1e-6 and abs(slope - 3) <= 0.05 and beats and elapsed <= 120
    detail = ", ".join(
        f"q={q:g} depth {rep.value(q, 'regression_depth(threshold=auto)', 'mse'):.3g} vs ols {rep.value(q, 'ols', 'mse'):.3g}"
        for q in cfg.q_grid
    )
    report("C10 regression", ok,
           f"noiseless |slope-2| {abs(slope0 - 2):.1e} (<=1e-6), contaminated |slope-3| {abs(slope - 3):.3f} (<=0.05), "
           f"d=2 Sigma-MSE {detail}, {elapsed:.1f}s (<=120s)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
