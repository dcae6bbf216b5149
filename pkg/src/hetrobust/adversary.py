"""Contaminated data generation.

Every sample i is replaced, with its own known probability lambda_i, by an
outlier. The strategies shipped here draw each outlier independently of the
clean data, which covers the lower-bound constructions: the sign adversary
for bounded means and the max-density adversary for Gaussian means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import ClassVar, Optional, Union

import numpy as np
from scipy.stats import norm

from .estimators import Dataset
from .exceptions import DomainError, InfeasibleCorruptionRate
from .profile import CorruptionProfile

__all__ = [
    "PointMass",
    "TwoPoint",
    "Gaussian",
    "LinearModel",
    "NoAdversary",
    "FixedOutlier",
    "OutlierDistribution",
    "BoundedLeCam",
    "GaussianMax",
    "ExplicitProfile",
    "PowerLawProfile",
    "Scenario",
    "sample_profile_powerlaw",
    "contaminate",
    "lecam_gamma",
    "bounded_lecam_outlier",
    "bounded_lecam_outliers",
    "max_density_normalizer",
    "max_density_pdf",
    "sample_max_density",
    "sample_residual_density",
    "gaussian_max_outlier",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


def _vec(x) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------- clean laws


@dataclass(frozen=True)
class PointMass:
    kind: ClassVar[str] = "point_mass"
    value: tuple

    @property
    def dim(self) -> int:
        return len(self.value)

    @property
    def truth(self) -> np.ndarray:
        return np.array(self.value)

    def sample(self, rng, size: int) -> np.ndarray:
        return np.tile(np.array(self.value), (size, 1))


@dataclass(frozen=True)
class TwoPoint:
    """``r e_1 (2 Ber(p) - 1)`` in R^dim."""

    kind: ClassVar[str] = "two_point"
    r: float = 1.0
    p: float = 0.5
    dim: int = 1

    @property
    def truth(self) -> np.ndarray:
        mu = np.zeros(self.dim)
        mu[0] = self.r * (2.0 * self.p - 1.0)
        return mu

    def sample(self, rng, size: int) -> np.ndarray:
        out = np.zeros((size, self.dim))
        out[:, 0] = self.r * (2.0 * (rng.random(size) < self.p) - 1.0)
        return out


@dataclass(frozen=True)
class Gaussian:
    kind: ClassVar[str] = "gaussian"
    mean: tuple
    scale: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def truth(self) -> np.ndarray:
        return np.array(self.mean)

    def sample(self, rng, size: int) -> np.ndarray:
        return np.array(self.mean) + self.scale * rng.standard_normal((size, self.dim))


@dataclass(frozen=True)
class LinearModel:
    """Covariates N(0, cov), responses N(covariates . beta, sigma^2)."""

    kind: ClassVar[str] = "regression"
    beta: tuple
    sigma: float = 1.0
    cov: Optional[tuple] = None

    @property
    def dim(self) -> int:
        return len(self.beta)

    @property
    def truth(self) -> np.ndarray:
        return np.array(self.beta)

    @property
    def covariance(self) -> np.ndarray:
        return np.eye(self.dim) if self.cov is None else np.array(self.cov)

    def sample(self, rng, size: int):
        chol = np.linalg.cholesky(self.covariance)
        w = rng.standard_normal((size, self.dim)) @ chol.T
        y = w @ np.array(self.beta) + self.sigma * rng.standard_normal(size)
        return w, y


CleanLaw = Union[PointMass, TwoPoint, Gaussian, LinearModel]

# ------------------------------------------------------------ adversaries


@dataclass(frozen=True)
class NoAdversary:
    """Flagged samples keep their clean value."""

    kind: ClassVar[str] = "none"

    def draw(self, lambdas, clean, rng):
        return None


@dataclass(frozen=True)
class FixedOutlier:
    """Constant replacement: ``value`` in mean mode, ``(covariate, response)`` in regression."""

    kind: ClassVar[str] = "fixed_outlier"
    value: Optional[tuple] = None
    covariate: Optional[tuple] = None
    response: Optional[float] = None

    def draw(self, lambdas, clean, rng):
        m = len(lambdas)
        if isinstance(clean, LinearModel):
            return np.tile(np.array(self.covariate), (m, 1)), np.full(m, float(self.response))
        return np.tile(np.array(self.value), (m, 1))


@dataclass(frozen=True)
class OutlierDistribution:
    kind: ClassVar[str] = "outlier_distribution"
    distribution: CleanLaw

    def draw(self, lambdas, clean, rng):
        return self.distribution.sample(rng, len(lambdas))


def lecam_gamma(lambda_i: float, delta: float, hypothesis: int = 1) -> float:
    """Success probability of the outlier sign under hypothesis h.

    Clean signs are Ber(1/2 - h delta). Above the rate 2 delta / (1 + 2 delta)
    the outlier uses gamma = 1/2 - h delta + h delta / lambda so the mixture
    is exactly Ber(1/2); below it the outlier is a clean draw.
    """
    if not 0.0 <= delta <= 0.25:
        raise DomainError(f"delta must lie in [0, 1/4], got {delta}")
    if hypothesis not in (1, -1):
        raise DomainError("hypothesis must be +1 or -1")
    base = 0.5 - hypothesis * delta
    if delta > 0 and lambda_i >= 2.0 * delta / (1.0 + 2.0 * delta):
        gamma = base + hypothesis * delta / lambda_i
        assert -1e-12 <= gamma <= 1.0 + 1e-12, gamma
        return min(max(gamma, 0.0), 1.0)
    return base


def bounded_lecam_outliers(lambdas, delta: float, r: float = 1.0, hypothesis: int = 1, seed=None, dim: int = 1) -> np.ndarray:
    """One outlier per entry of ``lambdas``, each ``r e_1 (2 Ber(gamma_i) - 1)``."""
    rng = np.random.default_rng(seed)
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    gammas = np.array([lecam_gamma(float(li), delta, hypothesis) for li in lam])
    out = np.zeros((lam.shape[0], dim))
    out[:, 0] = r * (2.0 * (rng.random(lam.shape[0]) < gammas) - 1.0)
    return out


def bounded_lecam_outlier(lambda_i: float, delta: float, r: float = 1.0, hypothesis: int = 1, seed=None, dim: int = 1) -> np.ndarray:
    return bounded_lecam_outliers([lambda_i], delta, r, hypothesis, seed, dim)[0]


@dataclass(frozen=True)
class BoundedLeCam:
    kind: ClassVar[str] = "bounded_lecam"
    delta: float
    r: float = 1.0
    hypothesis: int = 1

    def clean_law(self, dim: int = 1) -> TwoPoint:
        return TwoPoint(r=self.r, p=0.5 - self.hypothesis * self.delta, dim=dim)

    def draw(self, lambdas, clean, rng):
        return bounded_lecam_outliers(lambdas, self.delta, self.r, self.hypothesis, rng, clean.dim)


def _root_dim(d: int) -> int:
    s = math.isqrt(d)
    if d < 1 or s * s != d:
        raise DomainError(f"dimension must be a perfect square, got {d}")
    return s


def max_density_normalizer(delta: float, d: int = 1) -> float:
    """T = (2 Phi(delta))^sqrt(d), total mass of the pointwise max of the hypotheses."""
    return (2.0 * norm.cdf(delta)) ** _root_dim(d)


def max_density_pdf(x, delta: float) -> np.ndarray:
    """Univariate factor phi(|x| - delta) / (2 Phi(delta))."""
    x = np.asarray(x, dtype=float)
    return norm.pdf(np.abs(x) - delta) / (2.0 * norm.cdf(delta))


def _sample_max_coordinate(delta: float, size: int, rng) -> np.ndarray:
    # |N(delta, 1)| has density phi(y - delta) + phi(y + delta) on y >= 0; the
    # target phi(y - delta) / Phi(delta) is at most 1 / Phi(delta) times that,
    # giving acceptance phi(y - delta) / (phi(y - delta) + phi(y + delta)).
    out = np.empty(size)
    filled = 0
    while filled < size:
        m = max(16, int(1.1 * (size - filled) / max(norm.cdf(delta), 0.5)) + 16)
        y = np.abs(delta + rng.standard_normal(m))
        accept = rng.random(m) * (1.0 + np.exp(-2.0 * delta * y)) < 1.0
        y = y[accept][: size - filled]
        out[filled : filled + y.shape[0]] = y
        filled += y.shape[0]
    return out * np.where(rng.random(size) < 0.5, -1.0, 1.0)


def sample_max_density(delta: float, d: int, size: int, seed=None) -> np.ndarray:
    """Draws from max_tau P_delta(tau) / T: the first sqrt(d) coordinates
    follow phi(|x| - delta) / (2 Phi(delta)) independently, the rest N(0, 1)."""
    rng = np.random.default_rng(seed)
    s = _root_dim(d)
    out = rng.standard_normal((size, d))
    for j in range(s):
        out[:, j] = _sample_max_coordinate(delta, size, rng)
    return out


def sample_residual_density(delta: float, d: int, tau, size: int, seed=None) -> np.ndarray:
    """Draws from (max_tau' P(tau') - P(tau))_+ / (T - 1).

    Proposals come from max / T, whose ratio to the target is bounded by
    T / (T - 1); a proposal x is kept with probability
    1 - P(tau)(x) / max(x) = 1 - exp(delta sum_j (tau_j x_j - |x_j|)).
    """
    rng = np.random.default_rng(seed)
    s = _root_dim(d)
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (s,):
        raise DomainError(f"tau must have length {s}")
    if delta <= 0:
        raise DomainError("residual density is empty for delta <= 0")
    t_norm = max_density_normalizer(delta, d)
    rate = (t_norm - 1.0) / t_norm
    out = np.empty((size, d))
    filled = 0
    while filled < size:
        m = int(1.2 * (size - filled) / rate) + 16
        x = sample_max_density(delta, d, m, rng)
        log_ratio = delta * np.sum(tau * x[:, :s] - np.abs(x[:, :s]), axis=1)
        keep = x[rng.random(m) < -np.expm1(log_ratio)][: size - filled]
        out[filled : filled + keep.shape[0]] = keep
        filled += keep.shape[0]
    return out


def _gaussian_max_draws(lams: np.ndarray, delta: float, d: int, tau, rng) -> np.ndarray:
    t_norm = max_density_normalizer(delta, d)
    beta = (t_norm - 1.0) * (1.0 - lams) / lams
    assert np.all((beta >= 0.0) & (beta <= 1.0 + 1e-12)), beta
    out = sample_max_density(delta, d, lams.shape[0], rng)
    resid = rng.random(lams.shape[0]) < beta
    k = int(np.count_nonzero(resid))
    if k:
        out[resid] = sample_residual_density(delta, d, tau, k, rng)
    return out


def gaussian_max_outlier(lambda_i: float, delta: float, d: int, tau, seed=None, size: Optional[int] = None) -> np.ndarray:
    """Outlier making the corrupted sample distributed as max_tau' P(tau') / T.

    With probability beta = (T - 1)(1 - lambda) / lambda the outlier comes
    from the residual density, otherwise from the max density itself.
    Requires lambda >= 1 - 1 / T.
    """
    rng = np.random.default_rng(seed)
    t_norm = max_density_normalizer(delta, d)
    if not lambda_i >= 1.0 - 1.0 / t_norm or lambda_i <= 0:
        raise InfeasibleCorruptionRate(
            f"corruption rate {lambda_i} below 1 - 1/T = {1.0 - 1.0 / t_norm:.6g} for delta={delta}, d={d}"
        )
    m = 1 if size is None else size
    out = _gaussian_max_draws(np.full(m, float(lambda_i)), delta, d, tau, rng)
    return out[0] if size is None else out


@dataclass(frozen=True)
class GaussianMax:
    kind: ClassVar[str] = "gaussian_max"
    delta: float
    tau: tuple

    @property
    def dim(self) -> int:
        return len(self.tau) ** 2

    def clean_law(self) -> Gaussian:
        mean = np.zeros(self.dim)
        mean[: len(self.tau)] = self.delta * np.array(self.tau)
        return Gaussian(mean=_vec(mean))

    def feasibility_threshold(self) -> float:
        return 1.0 - 1.0 / max_density_normalizer(self.delta, self.dim)

    def draw(self, lambdas, clean, rng):
        lam = np.asarray(lambdas, dtype=float)
        # below the feasibility threshold the outlier is a clean draw
        out = clean.sample(rng, lam.shape[0])
        feasible = (lam >= self.feasibility_threshold()) & (lam > 0)
        if np.any(feasible):
            out[feasible] = _gaussian_max_draws(lam[feasible], self.delta, self.dim, self.tau, rng)
        return out


Adversary = Union[NoAdversary, FixedOutlier, OutlierDistribution, BoundedLeCam, GaussianMax]

# --------------------------------------------------------------- profiles


def sample_profile_powerlaw(n: int, q: float, seed=None) -> CorruptionProfile:
    """n i.i.d. rates with cdf F(t) = 1 - (1 - t)^q, by inversion."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    u = np.random.default_rng(seed).random(n)
    lam = -np.expm1(np.log1p(-u) / q)
    return CorruptionProfile.from_values(np.clip(lam, 0.0, 1.0))


@dataclass(frozen=True)
class ExplicitProfile:
    kind: ClassVar[str] = "explicit"
    lambdas: tuple

    def build(self, rng=None) -> CorruptionProfile:
        return CorruptionProfile.from_values(self.lambdas)


@dataclass(frozen=True)
class PowerLawProfile:
    kind: ClassVar[str] = "power_law"
    q: float
    n: int

    def build(self, rng=None) -> CorruptionProfile:
        return sample_profile_powerlaw(self.n, self.q, rng)


# --------------------------------------------------------------- scenario


def _law_from_dict(doc: dict, where: str) -> CleanLaw:
    kind = doc.get("kind")
    try:
        if kind == "point_mass":
            return PointMass(value=_vec(doc["value"]))
        if kind == "two_point":
            return TwoPoint(r=float(doc.get("r", 1.0)), p=float(doc.get("p", 0.5)), dim=int(doc.get("dim", 1)))
        if kind == "gaussian":
            return Gaussian(mean=_vec(doc["mean"]), scale=float(doc.get("scale", 1.0)))
        if kind == "regression":
            cov = doc.get("cov")
            cov = None if cov is None else tuple(_vec(row) for row in cov)
            return LinearModel(beta=_vec(doc["beta"]), sigma=float(doc.get("sigma", 1.0)), cov=cov)
    except KeyError as exc:
        raise DomainError(f"{where}: missing field {exc.args[0]!r}") from None
    raise DomainError(f"{where}: unknown distribution kind {kind!r}")


def _law_to_dict(law: CleanLaw) -> dict:
    if isinstance(law, PointMass):
        return {"kind": law.kind, "value": list(law.value)}
    if isinstance(law, TwoPoint):
        return {"kind": law.kind, "r": law.r, "p": law.p, "dim": law.dim}
    if isinstance(law, Gaussian):
        return {"kind": law.kind, "mean": list(law.mean), "scale": law.scale}
    doc = {"kind": law.kind, "beta": list(law.beta), "sigma": law.sigma}
    if law.cov is not None:
        doc["cov"] = [list(row) for row in law.cov]
    return doc


def _adversary_from_dict(doc: dict) -> Adversary:
    kind = doc.get("kind")
    try:
        if kind == "none":
            return NoAdversary()
        if kind == "fixed_outlier":
            value = doc.get("value")
            cov = doc.get("covariate")
            resp = doc.get("response")
            return FixedOutlier(
                value=None if value is None else _vec(value),
                covariate=None if cov is None else _vec(cov),
                response=None if resp is None else float(resp),
            )
        if kind == "outlier_distribution":
            return OutlierDistribution(distribution=_law_from_dict(doc["distribution"], "adversary.distribution"))
        if kind == "bounded_lecam":
            return BoundedLeCam(delta=float(doc["delta"]), r=float(doc.get("r", 1.0)), hypothesis=int(doc.get("hypothesis", 1)))
        if kind == "gaussian_max":
            return GaussianMax(delta=float(doc["delta"]), tau=_vec(doc["tau"]))
    except KeyError as exc:
        raise DomainError(f"adversary: missing field {exc.args[0]!r}") from None
    raise DomainError(f"adversary: unknown strategy {kind!r}")


def _adversary_to_dict(adv: Adversary) -> dict:
    if isinstance(adv, NoAdversary):
        return {"kind": adv.kind}
    if isinstance(adv, FixedOutlier):
        doc = {"kind": adv.kind}
        if adv.value is not None:
            doc["value"] = list(adv.value)
        if adv.covariate is not None:
            doc["covariate"] = list(adv.covariate)
        if adv.response is not None:
            doc["response"] = adv.response
        return doc
    if isinstance(adv, OutlierDistribution):
        return {"kind": adv.kind, "distribution": _law_to_dict(adv.distribution)}
    if isinstance(adv, BoundedLeCam):
        return {"kind": adv.kind, "delta": adv.delta, "r": adv.r, "hypothesis": adv.hypothesis}
    return {"kind": adv.kind, "delta": adv.delta, "tau": list(adv.tau)}


@dataclass(frozen=True)
class Scenario:
    """Clean law + adversary + where the corruption rates come from.

    The ground truth is the mean (or coefficient vector) of the clean law.
    """

    clean: CleanLaw
    adversary: Adversary
    profile_source: Optional[Union[ExplicitProfile, PowerLawProfile]] = None

    def __post_init__(self):
        adv, clean = self.adversary, self.clean
        regression = isinstance(clean, LinearModel)
        if isinstance(adv, FixedOutlier):
            if regression:
                if adv.covariate is None or adv.response is None:
                    raise DomainError("regression fixed_outlier needs covariate and response")
                if len(adv.covariate) != clean.dim:
                    raise DomainError("dimension mismatch between outlier covariate and clean law")
            elif adv.value is None or len(adv.value) != clean.dim:
                raise DomainError("dimension mismatch between fixed outlier and clean law")
        if isinstance(adv, OutlierDistribution):
            if isinstance(adv.distribution, LinearModel) != regression or adv.distribution.dim != clean.dim:
                raise DomainError("dimension mismatch between outlier distribution and clean law")
        if isinstance(adv, BoundedLeCam):
            if not 0.0 <= adv.delta <= 0.25:
                raise DomainError("bounded_lecam requires 0 <= delta <= 1/4")
            if adv.hypothesis not in (1, -1):
                raise DomainError("hypothesis must be +1 or -1")
            expected = adv.clean_law(getattr(clean, "dim", 1))
            if clean != expected:
                raise DomainError(f"bounded_lecam needs clean law {_law_to_dict(expected)}")
        if isinstance(adv, GaussianMax):
            _root_dim(adv.dim)
            if any(t not in (1.0, -1.0) for t in adv.tau):
                raise DomainError("tau entries must be +1 or -1")
            if clean != adv.clean_law():
                raise DomainError(f"gaussian_max needs clean law {_law_to_dict(adv.clean_law())}")

    @property
    def mode(self) -> str:
        return "regression" if isinstance(self.clean, LinearModel) else "mean"

    @property
    def dim(self) -> int:
        return self.clean.dim

    @property
    def truth(self) -> np.ndarray:
        return self.clean.truth

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        if "clean" not in doc or "adversary" not in doc:
            raise DomainError("scenario needs 'clean' and 'adversary'")
        src = doc.get("profile")
        source = None
        if src is not None:
            kind = src.get("kind")
            if kind == "explicit":
                source = ExplicitProfile(lambdas=_vec(src["lambdas"]))
            elif kind == "power_law":
                source = PowerLawProfile(q=float(src["q"]), n=int(src["n"]))
            else:
                raise DomainError(f"profile: unknown kind {kind!r}")
        return cls(_law_from_dict(doc["clean"], "clean"), _adversary_from_dict(doc["adversary"]), source)

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "clean": _law_to_dict(self.clean),
            "adversary": _adversary_to_dict(self.adversary),
        }
        src = self.profile_source
        if isinstance(src, ExplicitProfile):
            doc["profile"] = {"kind": src.kind, "lambdas": list(src.lambdas)}
        elif isinstance(src, PowerLawProfile):
            doc["profile"] = {"kind": src.kind, "q": src.q, "n": src.n}
        return doc

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def with_profile(self, source) -> "Scenario":
        return Scenario(self.clean, self.adversary, source)


def contaminate(scenario: Scenario, profile: Optional[CorruptionProfile] = None, seed=None) -> Dataset:
    """Draw a lambda-contaminated dataset.

    X_i come i.i.d. from the clean law, B_i ~ Bern(lambda_i) independently,
    and flagged samples are replaced by the adversary's independent draw.
    The realised flags are kept on the dataset for diagnostics only.
    """
    rng = np.random.default_rng(seed)
    if profile is None:
        if scenario.profile_source is None:
            raise DomainError("scenario has no profile source and no profile was given")
        profile = scenario.profile_source.build(rng)
    lam = profile.in_input_order()
    n = lam.shape[0]
    flags = rng.random(n) < lam
    clean = scenario.clean
    if isinstance(clean, LinearModel):
        cov, y = clean.sample(rng, n)
        drawn = scenario.adversary.draw(lam[flags], clean, rng)
        if drawn is not None:
            cov[flags], y[flags] = drawn
        return Dataset(cov, profile, y, corrupted=flags)
    z = clean.sample(rng, n)
    drawn = scenario.adversary.draw(lam[flags], clean, rng)
    if drawn is not None:
        if drawn.shape[1] != z.shape[1]:
            raise DomainError("dimension mismatch between outliers and clean samples")
        z[flags] = drawn
    return Dataset(z, profile, corrupted=flags)
