"""Sample weights on the probability simplex.

The reweighting estimator minimises ``||w||^2 + c (w . lambda)^2`` over the
simplex. The minimiser has the form ``w_i = (beta - c (w . lambda) lambda_i)_+``
so only the length of its support needs to be found, which a single pass
over the sorted rates does.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EmptySelectionError
from .profile import CorruptionProfile, count_at_most

__all__ = [
    "DEFAULT_C",
    "WeightVector",
    "objective",
    "kkt_residual",
    "solve_optimal_weights",
    "oracle_solve",
    "project_to_simplex",
    "threshold_weights",
    "uniform_weights",
    "write_weights_csv",
]

DEFAULT_C = 3.0


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Weights aligned with ``profile.lambdas`` (sorted order)."""

    weights: np.ndarray
    profile: CorruptionProfile

    def __post_init__(self):
        if self.weights.shape != self.profile.lambdas.shape:
            raise DomainError("weight vector and profile have different lengths")

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def original(self) -> np.ndarray:
        """Weights in the caller's sample order."""
        return self.profile.to_input_order(self.weights)

    @property
    def squared_norm(self) -> float:
        return math.fsum(self.weights * self.weights)

    @property
    def effective_sample_size(self) -> float:
        return 1.0 / self.squared_norm

    @property
    def included_count(self) -> int:
        return int(np.count_nonzero(self.weights))

    def dot_lambda(self) -> float:
        return math.fsum(self.weights * self.profile.lambdas)

    def objective(self, c: float = DEFAULT_C) -> float:
        return objective(self.weights, self.profile.lambdas, c)


def objective(w: np.ndarray, lam: np.ndarray, c: float) -> float:
    """``||w||^2 + c (w . lambda)^2``."""
    s = math.fsum(w * lam)
    return math.fsum(w * w) + c * s * s


def kkt_residual(weights: WeightVector, c: float) -> float:
    """Largest violation of the fixed point ``w_i = (beta - c (w.lambda) lambda_i)_+``.

    ``beta`` is recovered from the support as the value making the positive
    part sum to one.
    """
    w = weights.weights
    lam = weights.profile.lambdas
    a = c * weights.dot_lambda()
    support = w > 0
    k = int(np.count_nonzero(support))
    beta = (1.0 + a * math.fsum(lam[support])) / k
    return float(np.max(np.abs(w - np.maximum(beta - a * lam, 0.0))))


def solve_optimal_weights(profile: CorruptionProfile, c: float = DEFAULT_C, check: bool = True) -> WeightVector:
    """Exact minimiser of ``||w||^2 + c (w . lambda)^2`` over the simplex.

    The support grows while the next rate is strictly below
    ``(1 + c S2_k) / (c S1_k)`` (prefix sums of rates and squared rates);
    a zero prefix sum makes the bound infinite. A virtual rate of +inf past
    the last sample ends the scan at k = n. A rate exactly on the bound gets
    zero weight whichever side the tie falls on.
    """
    n = len(profile)
    if n == 0:
        raise DomainError("cannot weight an empty profile")
    if not c >= 0:
        raise DomainError(f"penalty c must be >= 0, got {c}")
    lam = profile.lambdas
    s1 = np.cumsum(lam)
    s2 = np.cumsum(lam * lam)
    # advance from k to k + 1 iff c * lam[k] * S1_k < 1 + c * S2_k (0-based lam[k] is the (k+1)-th rate)
    grow = c * lam[1:] * s1[:-1] < 1.0 + c * s2[:-1]
    stops = np.flatnonzero(~grow)
    k = int(stops[0]) + 1 if stops.size else n

    head = lam[:k]
    sum1 = math.fsum(head)
    sum2 = math.fsum(head * head)
    denom = 1.0 + c * sum2
    # w_i = beta - alpha lambda_i with beta = D / (k D - c S1^2), alpha = c S1 beta / D,
    # folded into one division per weight
    w = np.zeros(n)
    w[:k] = (denom - c * sum1 * head) / (k * denom - c * sum1 * sum1)
    result = WeightVector(w, profile)
    if check:
        residual = kkt_residual(result, c)
        if residual > 1e-10:
            raise AssertionError(f"KKT residual {residual:.3e} exceeds 1e-10")
    return result


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def oracle_solve(
    profile: CorruptionProfile,
    c: float = DEFAULT_C,
    iters: int = 100_000,
    step: float | None = None,
    tol: float = 1e-15,
) -> WeightVector:
    """Projected-gradient solve of the same objective; verification only.

    Spectral (Barzilai-Borwein) step lengths with a non-monotone Armijo
    safeguard, started from uniform weights. ``step`` is the first step
    length (default ``1 / L`` with ``L`` the gradient's Lipschitz constant).
    Stops after ``iters`` iterations or once the projected-gradient step
    moves less than ``tol`` in sup norm.
    """
    if iters < 1:
        raise DomainError("iters must be >= 1")
    n = len(profile)
    lam = profile.lambdas

    def f(w):
        s = w @ lam
        return w @ w + c * s * s

    def grad(w):
        return 2.0 * w + 2.0 * c * (w @ lam) * lam

    lipschitz = 2.0 + 2.0 * c * float(lam @ lam)
    alpha = 1.0 / lipschitz if step is None else float(step)
    step_min, step_max = 1e-12, 1e12
    memory = 10

    w = np.full(n, 1.0 / n)
    g = grad(w)
    history = [f(w)]
    for _ in range(iters):
        d = project_to_simplex(w - alpha * g) - w
        if np.max(np.abs(d)) <= tol:
            break
        f_ref = max(history[-memory:])
        gd = g @ d
        t = 1.0
        while True:
            w_new = w + t * d
            f_new = f(w_new)
            if f_new <= f_ref + 1e-4 * t * gd or t < 1e-20:
                break
            t *= 0.5
        g_new = grad(w_new)
        s_vec = w_new - w
        y_vec = g_new - g
        sy = s_vec @ y_vec
        alpha = min(step_max, max(step_min, (s_vec @ s_vec) / sy)) if sy > 0 else step_max
        w, g = w_new, g_new
        history.append(f_new)
    return WeightVector(w, profile)


def threshold_weights(profile: CorruptionProfile, t: float) -> WeightVector:
    """Uniform weight on samples with rate <= t."""
    m = count_at_most(profile, t)
    if m == 0:
        raise EmptySelectionError(f"no sample has corruption rate <= {t}")
    w = np.zeros(len(profile))
    w[:m] = 1.0 / m
    return WeightVector(w, profile)


def uniform_weights(profile: CorruptionProfile) -> WeightVector:
    n = len(profile)
    if n == 0:
        raise DomainError("cannot weight an empty profile")
    return WeightVector(np.full(n, 1.0 / n), profile)


def write_weights_csv(weights: WeightVector, path) -> None:
    """Audit table with columns index, lambda, weight in caller order."""
    lam = weights.profile.in_input_order()
    w = weights.original
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda", "weight"])
        for i, (li, wi) in enumerate(zip(lam, w)):
            writer.writerow([i, repr(float(li)), repr(float(wi))])
