"""Corruption profiles, counting functions and the rate functional.

A profile is the vector of per-sample corruption probabilities. It is kept
sorted ascending together with the permutation back to the caller's order,
so every counting query is a binary search.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DomainError

__all__ = [
    "CorruptionProfile",
    "RateValue",
    "DeltaStarCertificate",
    "ThresholdMap",
    "BOUNDED_MAP",
    "gaussian_map",
    "count_at_most",
    "count_strictly_below",
    "rate_functional",
    "delta_star",
    "lecam_lower_bound",
]


@dataclass(frozen=True, eq=False)
class CorruptionProfile:
    """Sorted corruption rates.

    Attributes
    ----------
    lambdas:
        Rates sorted ascending, read-only.
    original_order:
        ``original_order[j]`` is the caller's index of ``lambdas[j]``.
    """

    lambdas: np.ndarray
    original_order: np.ndarray

    @classmethod
    def from_values(cls, values, inflation: float = 1.0) -> "CorruptionProfile":
        """Build a profile from rates given in caller order.

        ``inflation`` multiplies every rate (clamped at 1) so that a constant
        factor over-estimate of the true rates can be supplied.
        """
        lam = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(lam)) or np.any(lam < 0.0) or np.any(lam > 1.0):
            raise DomainError("corruption rates must lie in [0, 1]")
        if not inflation >= 1.0:
            raise DomainError(f"inflation factor must be >= 1, got {inflation}")
        if inflation != 1.0:
            lam = np.minimum(lam * inflation, 1.0)
        order = np.argsort(lam, kind="stable")
        lam_sorted = lam[order]
        lam_sorted.setflags(write=False)
        order.setflags(write=False)
        return cls(lam_sorted, order)

    def __len__(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def in_input_order(self) -> np.ndarray:
        return self.to_input_order(self.lambdas)

    def to_input_order(self, sorted_values) -> np.ndarray:
        """Scatter an array aligned with ``lambdas`` back to caller order."""
        sorted_values = np.asarray(sorted_values)
        out = np.empty_like(sorted_values)
        out[self.original_order] = sorted_values
        return out

    def to_sorted(self, input_values) -> np.ndarray:
        """Gather an array given in caller order into sorted order."""
        return np.asarray(input_values)[self.original_order]

    def inflated(self, factor: float) -> "CorruptionProfile":
        return CorruptionProfile.from_values(self.in_input_order(), inflation=factor)

    def subset(self, input_indices) -> "CorruptionProfile":
        """Profile of the samples at the given caller indices."""
        return CorruptionProfile.from_values(self.in_input_order()[np.asarray(input_indices)])


def count_at_most(profile: CorruptionProfile, t: float) -> int:
    """N(t): number of samples with rate <= t."""
    return int(np.searchsorted(profile.lambdas, t, side="right"))


def count_strictly_below(profile: CorruptionProfile, t: float) -> int:
    """n(t): number of samples with rate < t."""
    return int(np.searchsorted(profile.lambdas, t, side="left"))


@dataclass(frozen=True)
class RateValue:
    value: float
    argmin_threshold: float
    included_count: int


def rate_functional(profile: CorruptionProfile, k: float) -> RateValue:
    """Exact minimum over t in [0, 1] of k / N(t) + t**2.

    N is a right-continuous step function that only jumps at the distinct
    rates, while t**2 increases, so on every constant piece the minimum sits
    at the piece's left end. The distinct rates are therefore the complete
    candidate set; thresholds below the smallest rate have N = 0 and are
    infeasible. Ties resolve to the smallest threshold.
    """
    if len(profile) == 0:
        raise DomainError("rate functional of an empty profile")
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    lam = profile.lambdas
    last_of_run = np.flatnonzero(np.append(lam[1:] != lam[:-1], True))
    candidates = lam[last_of_run]
    counts = last_of_run + 1
    values = k / counts + candidates**2
    j = int(np.argmin(values))
    t = float(candidates[j])
    count = int(counts[j])
    return RateValue(value=k / count + t * t, argmin_threshold=t, included_count=count)


@dataclass(frozen=True)
class ThresholdMap:
    """How a lower-bound scale delta turns into a corruption threshold.

    ``inverse_sq(u)`` returns the squared delta at which the threshold
    reaches ``u`` as an exact rational, or ``None`` when it never does.
    A rate ``u`` counts as included at scale delta iff
    ``inverse_sq(u) <= delta**2``, which keeps every certificate check in
    exact arithmetic.
    """

    name: str
    constant: int
    forward: "object"
    inverse_sq: "object"


def _bounded_inverse_sq(u: float) -> Fraction:
    return Fraction(u) ** 2 / 4


BOUNDED_MAP = ThresholdMap(
    name="bounded",
    constant=12,
    forward=lambda delta: 2.0 * delta,
    inverse_sq=_bounded_inverse_sq,
)


def gaussian_map(d: int) -> ThresholdMap:
    """Threshold map delta -> 1 - exp(-delta sqrt(d)) with constant 64."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    root_d = math.sqrt(d)

    def inverse_sq(u: float):
        if u >= 1.0:
            return None
        return Fraction(math.log1p(-u) ** 2 / d)

    return ThresholdMap(
        name=f"gaussian(d={d})",
        constant=64,
        forward=lambda delta: -math.expm1(-delta * root_d),
        inverse_sq=inverse_sq,
    )


@dataclass(frozen=True)
class DeltaStarCertificate:
    """Crossing point of h(x) = N(g(x)) - 1 / (C x**2).

    ``delta_star_sq`` is the exact squared value; ``delta_star`` its float
    square root. ``n_below`` / ``N_below`` count rates strictly below / at
    most the threshold g(delta_star).
    """

    delta_star: float
    delta_star_sq: Fraction
    n_below: int
    N_below: int
    degenerate: bool
    constant: int
    map_name: str

    def check(self) -> bool:
        """Verify the certificate inequalities in exact arithmetic."""
        s, c = self.delta_star_sq, self.constant
        if self.degenerate:
            return self.N_below * c * s < 1
        return self.N_below * c * s >= 1 and self.n_below * c * s <= 1


_QUARTER_SQ = Fraction(1, 16)


def delta_star(profile: CorruptionProfile, threshold_map: ThresholdMap = BOUNDED_MAP) -> DeltaStarCertificate:
    """Smallest delta in (0, 1/4] with N(g(delta)) >= 1 / (C delta**2).

    h is non-decreasing and right-continuous, so the infimum of its
    non-negative set is attained and the left limit there is <= 0. The scan
    walks the constant pieces of N(g(.)) in order; on the piece starting at
    breakpoint b with count m the first admissible square is
    max(b, 1 / (C m)).
    """
    if len(profile) == 0:
        raise DomainError("delta_star of an empty profile")
    c = threshold_map.constant
    lam = profile.lambdas
    last_of_run = np.flatnonzero(np.append(lam[1:] != lam[:-1], True))
    breaks = []
    cum = []
    for j in last_of_run:
        b = threshold_map.inverse_sq(float(lam[j]))
        if b is None:
            break
        breaks.append(b)
        cum.append(int(j) + 1)

    def counts_at(s: Fraction) -> tuple[int, int]:
        lo = bisect_left(breaks, s)
        hi = bisect_right(breaks, s)
        below = cum[lo - 1] if lo > 0 else 0
        at_most = cum[hi - 1] if hi > 0 else 0
        return below, at_most

    n_q, N_q = counts_at(_QUARTER_SQ)
    if N_q * c * _QUARTER_SQ < 1:
        return DeltaStarCertificate(0.25, _QUARTER_SQ, n_q, N_q, True, c, threshold_map.name)

    for j, b in enumerate(breaks):
        if b > _QUARTER_SQ:
            break
        s = max(b, Fraction(1, c * cum[j]))
        upper = breaks[j + 1] if j + 1 < len(breaks) else None
        if s <= _QUARTER_SQ and (upper is None or s < upper):
            n_below, N_below = counts_at(s)
            return DeltaStarCertificate(
                math.sqrt(s), s, n_below, N_below, False, c, threshold_map.name
            )
    raise AssertionError("h(1/4) >= 0 but no crossing found")  # pragma: no cover


def lecam_lower_bound(profile: CorruptionProfile, r: float, delta: float) -> float:
    """Two-point lower bound r^2 delta^2 (1 - sqrt(6 delta^2 n(2 delta))).

    May be negative; callers clamp at zero for reporting.
    """
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    if not 0.0 <= delta <= 0.25:
        raise DomainError(f"delta must lie in [0, 1/4], got {delta}")
    m = count_strictly_below(profile, 2.0 * delta)
    return r * r * delta * delta * (1.0 - math.sqrt(6.0 * delta * delta * m))
