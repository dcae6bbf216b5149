import numpy as np
import pytest
from scipy import integrate, stats

from hetrobust.adversary import (
    BoundedLeCam,
    ExplicitProfile,
    FixedOutlier,
    Gaussian,
    GaussianMax,
    LinearModel,
    NoAdversary,
    PointMass,
    PowerLawProfile,
    Scenario,
    TwoPoint,
    bounded_lecam_outliers,
    contaminate,
    gaussian_max_outlier,
    lecam_gamma,
    max_density_normalizer,
    max_density_pdf,
    sample_profile_powerlaw,
)
from hetrobust.exceptions import DomainError, InfeasibleCorruptionRate


def test_lecam_gamma_makes_fair_mixture():
    for lam, delta in [(0.5, 0.1), (1.0, 0.25), (0.4, 0.2)]:
        for h in (1, -1):
            clean = 0.5 - h * delta
            mixed = (1 - lam) * clean + lam * lecam_gamma(lam, delta, h)
            assert mixed == pytest.approx(0.5, abs=1e-15)


def test_lecam_gamma_below_threshold_is_clean():
    assert lecam_gamma(0.01, 0.2, 1) == pytest.approx(0.3)


def test_lecam_domain():
    with pytest.raises(DomainError):
        lecam_gamma(0.5, 0.3)
    with pytest.raises(DomainError):
        lecam_gamma(0.5, 0.1, 0)


def test_lecam_outliers_are_signs():
    out = bounded_lecam_outliers(np.full(100, 0.8), 0.1, 2.0, 1, seed=0, dim=3)
    assert set(np.unique(out[:, 0])) <= {-2.0, 2.0}
    assert np.all(out[:, 1:] == 0)


def test_max_density_normalizer():
    assert max_density_normalizer(0.0, 1) == pytest.approx(1.0)
    assert max_density_normalizer(0.5, 4) == pytest.approx((2 * stats.norm.cdf(0.5)) ** 2)
    with pytest.raises(DomainError):
        max_density_normalizer(0.5, 3)


def test_max_density_integrates_to_one():
    total, _ = integrate.quad(lambda x: max_density_pdf(x, 0.7), -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_gaussian_max_infeasible():
    with pytest.raises(InfeasibleCorruptionRate):
        gaussian_max_outlier(0.1, 0.5, 1, [1.0])


def test_gaussian_max_corrupted_law_matches_density():
    rng = np.random.default_rng(4)
    delta, lam, m = 0.5, 0.9, 20000
    clean = rng.normal(delta, 1.0, m)
    flags = rng.random(m) < lam
    clean[flags] = gaussian_max_outlier(lam, delta, 1, [1.0], seed=5, size=int(flags.sum()))[:, 0]
    cdf = lambda x: 0.5 + np.sign(x) * (stats.norm.cdf(np.abs(x) - delta) - stats.norm.cdf(-delta)) / (
        2 * stats.norm.cdf(delta)
    )
    assert stats.kstest(clean, cdf).statistic < 0.015


def test_power_law_profile_mean():
    p = sample_profile_powerlaw(20000, 3.0, seed=1)
    assert p.lambdas.mean() == pytest.approx(0.25, abs=0.01)
    assert p.lambdas.min() >= 0 and p.lambdas.max() <= 1


def test_power_law_profile_seeded():
    a = sample_profile_powerlaw(50, 2.0, seed=7).lambdas
    b = sample_profile_powerlaw(50, 2.0, seed=7).lambdas
    assert np.array_equal(a, b)


def test_contaminate_flags_and_values():
    sc = Scenario(PointMass((0.0,)), FixedOutlier(value=(1.0,)), ExplicitProfile((0.0, 1.0, 0.0, 1.0)))
    data = contaminate(sc, seed=0)
    assert data.corrupted.tolist() == [False, True, False, True]
    assert data.points[:, 0].tolist() == [0.0, 1.0, 0.0, 1.0]


def test_contaminate_regression():
    sc = Scenario(
        LinearModel(beta=(1.0, 2.0), sigma=0.0),
        FixedOutlier(covariate=(5.0, 5.0), response=-1.0),
        PowerLawProfile(q=1.0, n=200),
    )
    data = contaminate(sc, seed=3)
    assert data.mode == "regression"
    bad = data.corrupted
    assert np.all(data.responses[bad] == -1.0)
    assert np.allclose(data.responses[~bad], data.points[~bad] @ [1.0, 2.0])


def test_no_adversary_keeps_clean():
    sc = Scenario(PointMass((2.0,)), NoAdversary(), ExplicitProfile((1.0, 1.0)))
    assert contaminate(sc, seed=0).points[:, 0].tolist() == [2.0, 2.0]


def test_scenario_validation():
    with pytest.raises(DomainError):
        Scenario(PointMass((0.0, 0.0)), FixedOutlier(value=(1.0,)))
    with pytest.raises(DomainError):
        Scenario(Gaussian(mean=(0.0,)), BoundedLeCam(delta=0.1))
    with pytest.raises(DomainError):
        Scenario(Gaussian(mean=(0.0,)), GaussianMax(delta=0.5, tau=(1.0,)))


def test_scenario_json_round_trip():
    sc = Scenario(TwoPoint(r=1.0, p=0.4), BoundedLeCam(delta=0.1), PowerLawProfile(q=2.0, n=10))
    again = Scenario.from_json(sc.to_json())
    assert again == sc
    assert again.to_dict()["schema_version"] == 1


def test_gaussian_max_scenario_draws():
    adv = GaussianMax(delta=0.5, tau=(-1.0,))
    sc = Scenario(adv.clean_law(), adv, ExplicitProfile((0.9,) * 500 + (0.01,) * 500))
    data = contaminate(sc, seed=2)
    assert data.points.shape == (1000, 1)
    assert np.all(np.isfinite(data.points))
