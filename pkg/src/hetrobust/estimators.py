"""Weighted mean, weighted Tukey median and weighted regression depth estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DomainError, SingularDesignError
from .profile import CorruptionProfile
from .weights import WeightVector, uniform_weights

__all__ = [
    "Dataset",
    "DepthQuery",
    "SearchBudget",
    "EstimateResult",
    "make_query",
    "weighted_median",
    "weighted_mean",
    "weighted_tukey_depth",
    "weighted_tukey_median",
    "weighted_regression_depth",
    "weighted_regression_coefficient",
    "ols",
    "baselines",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations paired with their corruption profile.

    In mean mode ``points`` holds the observations. In regression mode it
    holds the covariates and ``responses`` the scalar responses. Rows are in
    the caller's order; ``profile`` maps them to sorted order. ``corrupted``
    is diagnostic output of the simulator and is never read by estimators.
    """

    points: np.ndarray
    profile: CorruptionProfile
    responses: Optional[np.ndarray] = None
    corrupted: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise DomainError("points must be an (n, d) array with d >= 1")
        if pts.shape[0] != len(self.profile):
            raise DomainError(f"{pts.shape[0]} points but {len(self.profile)} corruption rates")
        object.__setattr__(self, "points", pts)
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float).ravel()
            if y.shape[0] != pts.shape[0]:
                raise DomainError("responses and covariates have different lengths")
            object.__setattr__(self, "responses", y)

    @property
    def mode(self) -> str:
        return "mean" if self.responses is None else "regression"

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def shifted(self, s) -> "Dataset":
        return Dataset(self.points + np.asarray(s, dtype=float), self.profile, self.responses)


@dataclass(frozen=True)
class SearchBudget:
    directions: int = 64
    starts: int = 16
    rounds: int = 40
    seed: int = 0


@dataclass(frozen=True, eq=False)
class DepthQuery:
    candidate: np.ndarray
    directions: np.ndarray
    exact: bool

    def __post_init__(self):
        norms = np.linalg.norm(self.directions, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-12):
            raise DomainError("query directions must be unit vectors")


@dataclass(frozen=True, eq=False)
class EstimateResult:
    estimate: np.ndarray
    method: str
    weights_used: Optional[WeightVector] = None
    achieved_depth: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _sphere_directions(d: int, count: int, rng) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    v = np.random.default_rng(rng).standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def make_query(candidate, d: int, n_directions: int = 64, seed=0) -> DepthQuery:
    """Depth query at ``candidate`` with seeded random unit directions."""
    eta = np.atleast_1d(np.asarray(candidate, dtype=float))
    if eta.shape != (d,):
        raise DomainError(f"candidate has shape {eta.shape}, expected ({d},)")
    return DepthQuery(eta, _sphere_directions(d, n_directions, seed), exact=(d == 1))


def _augment(base: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Add +-normalised ``vectors`` (and their rotations when d = 2)."""
    norms = np.linalg.norm(vectors, axis=1)
    u = vectors[norms > 0] / norms[norms > 0, None]
    parts = [base, u, -u]
    if vectors.shape[1] == 2:
        perp = u[:, ::-1] * np.array([-1.0, 1.0])
        parts += [perp, -perp]
    return np.vstack(parts)


def _check_weights(data: Dataset, w: WeightVector) -> np.ndarray:
    if len(w) != data.n:
        raise DomainError(f"{len(w)} weights for {data.n} samples")
    return w.original


def weighted_median(values, weights) -> float:
    """Point where the sorted cumulative weight first reaches one half.

    When it hits one half exactly the midpoint of the two straddling samples
    is returned. Zero-weight samples are ignored.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    keep = weights > 0
    if not np.any(keep):
        raise DomainError("all weights are zero")
    v = values[keep]
    wk = weights[keep]
    order = np.argsort(v, kind="stable")
    v = v[order]
    cum = np.cumsum(wk[order])
    cum /= cum[-1]
    j = int(np.searchsorted(cum, 0.5 - 1e-12, side="left"))
    if abs(cum[j] - 0.5) <= 1e-12 and j + 1 < v.shape[0]:
        return 0.5 * (v[j] + v[j + 1])
    return float(v[j])


def weighted_mean(data: Dataset, w: WeightVector) -> EstimateResult:
    """``sum_i w_i Z_i`` with compensated summation per coordinate."""
    if data.mode != "mean":
        raise DomainError("weighted_mean needs a mean-mode dataset")
    wo = _check_weights(data, w)
    prod = data.points * wo[:, None]
    est = np.array([math.fsum(prod[:, j]) for j in range(data.d)])
    return EstimateResult(est, "weighted_mean", w)


def _halfspace_depths(points, w, etas, directions) -> np.ndarray:
    """min over directions of sum_i w_i 1{v.(Z_i - eta) >= 0}, one value per eta."""
    proj = points @ directions.T
    thr = etas @ directions.T
    ind = proj[None, :, :] >= thr[:, None, :]
    return np.min(np.einsum("i,cij->cj", w, ind), axis=1)


def weighted_tukey_depth(data: Dataset, w: WeightVector, q: DepthQuery) -> float:
    """Weighted halfspace depth of ``q.candidate``.

    Exact for d = 1. For d >= 2 the minimum is over the query directions
    plus the normalised differences Z_i - eta, so the value is an upper
    bound of the true depth.
    """
    if data.mode != "mean":
        raise DomainError("Tukey depth needs a mean-mode dataset")
    wo = _check_weights(data, w)
    eta = np.asarray(q.candidate, dtype=float)
    if data.d == 1:
        z = data.points[:, 0] - eta[0]
        return float(min(math.fsum(wo[z >= 0]), math.fsum(wo[z <= 0])))
    dirs = _augment(q.directions, data.points - eta)
    return float(_halfspace_depths(data.points, wo, eta[None, :], dirs)[0])


def _local_search(score, starts: np.ndarray, step0: np.ndarray, rounds: int):
    """Multi-start shrinking-grid ascent of a piecewise constant score.

    Each round scores the grid ``x + h * offsets`` and moves to the best
    point, staying put on ties; ``h`` halves whenever no move happens.
    """
    d = starts.shape[1]
    if d <= 3:
        offsets = np.array(np.meshgrid(*[[0.0, -1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    else:
        eye = np.eye(d)
        offsets = np.vstack([np.zeros(d), eye, -eye])
    best_x, best_s = None, -np.inf
    for x in starts:
        h = step0.copy()
        s = score(x[None, :])[0]
        for _ in range(rounds):
            cands = x + offsets * h
            vals = score(cands)
            j = int(np.argmax(vals))
            if vals[j] > s:
                x, s = cands[j], vals[j]
            else:
                h = h * 0.5
        if s > best_s:
            best_x, best_s = x, s
    return best_x, best_s


def weighted_tukey_median(data: Dataset, w: WeightVector, search: SearchBudget = SearchBudget()) -> EstimateResult:
    """Point of (approximately) maximal weighted Tukey depth.

    d = 1 is the exact weighted median. For d >= 2 the depth over a fixed
    seeded direction set is maximised by multi-start grid search from the
    coordinate-wise weighted median and the heaviest samples, with steps
    scaled to the bounding box of the weighted samples.
    """
    if data.mode != "mean":
        raise DomainError("Tukey median needs a mean-mode dataset")
    wo = _check_weights(data, w)
    if not np.any(wo > 0):
        raise DomainError("all weights are zero")
    if data.d == 1:
        est = np.array([weighted_median(data.points[:, 0], wo)])
        q = make_query(est, 1)
        return EstimateResult(est, "tukey_median", w, weighted_tukey_depth(data, w, q))

    pts = data.points
    active = pts[wo > 0]
    coord_median = np.array([weighted_median(pts[:, j], wo) for j in range(data.d)])
    heavy = np.argsort(-wo, kind="stable")[: max(search.starts - 1, 0)]
    heavy = heavy[wo[heavy] > 0]
    starts = np.vstack([coord_median[None, :], pts[heavy]])
    extent = active.max(axis=0) - active.min(axis=0)
    step0 = np.where(extent > 0, extent, 1.0) / 4.0
    dirs = _sphere_directions(data.d, search.directions, search.seed)
    x, _ = _local_search(lambda etas: _halfspace_depths(pts, wo, etas, dirs), starts, step0, search.rounds)
    q = DepthQuery(x, dirs, exact=False)
    return EstimateResult(x, "tukey_median", w, weighted_tukey_depth(data, w, q))


def _regression_depths(cov, y, w, etas, directions) -> np.ndarray:
    side = np.sign(cov @ directions.T)
    resid = np.sign(y[None, :] - etas @ cov.T)
    ind = resid[:, :, None] * side[None, :, :] >= 0
    return np.min(np.einsum("i,cij->cj", w, ind), axis=1)


def weighted_regression_depth(data: Dataset, w: WeightVector, q: DepthQuery) -> float:
    """Weighted regression depth of ``q.candidate``.

    Counts samples whose residual sign agrees with the side of the
    direction they fall on, zero products counting in every direction.
    Exact for d = 1; for d >= 2 the direction set is augmented with the
    normalised covariates.
    """
    if data.mode != "regression":
        raise DomainError("regression depth needs a regression-mode dataset")
    wo = _check_weights(data, w)
    eta = np.asarray(q.candidate, dtype=float)
    dirs = q.directions if data.d == 1 else _augment(q.directions, data.points)
    if data.d == 1:
        dirs = np.array([[1.0], [-1.0]])
    return float(_regression_depths(data.points, data.responses, wo, eta[None, :], dirs)[0])


def _wls(cov, y, wo):
    keep = wo > 0
    sw = np.sqrt(wo[keep])
    a = cov[keep] * sw[:, None]
    if np.linalg.matrix_rank(a) < cov.shape[1]:
        return None
    return np.linalg.lstsq(a, y[keep] * sw, rcond=None)[0]


def weighted_regression_coefficient(
    data: Dataset, w: WeightVector, search: SearchBudget = SearchBudget()
) -> EstimateResult:
    """Coefficient of (approximately) maximal weighted regression depth.

    For d = 1 the depth of eta equals the weighted one-dimensional depth of
    eta among the slopes y_i / x_i (samples with x_i = 0 count everywhere),
    so the weighted median of those slopes is an exact maximiser. For d >= 2
    the grid search starts from the weighted least-squares fit and exact
    fits through seeded d-subsets of the heaviest samples.
    """
    if data.mode != "regression":
        raise DomainError("regression coefficient needs a regression-mode dataset")
    wo = _check_weights(data, w)
    cov, y = data.points, data.responses
    keep = wo > 0
    if not np.any(keep):
        raise DomainError("all weights are zero")
    if np.all(cov[keep] == cov[keep][0]):
        raise DomainError("degenerate covariates: all covariate rows are identical")

    if data.d == 1:
        x = cov[:, 0]
        nz = keep & (x != 0)
        est = np.array([weighted_median(y[nz] / x[nz], wo[nz])])
        q = make_query(est, 1)
        return EstimateResult(est, "regression_depth", w, weighted_regression_depth(data, w, q))

    rng = np.random.default_rng(search.seed)
    starts = []
    fit = _wls(cov, y, wo)
    if fit is not None:
        starts.append(fit)
    pool = np.argsort(-wo, kind="stable")[: max(4 * search.starts, 2 * data.d)]
    pool = pool[wo[pool] > 0]
    tries = 0
    while len(starts) < search.starts and tries < 8 * search.starts and pool.size >= data.d:
        tries += 1
        idx = rng.choice(pool, size=data.d, replace=False)
        a = cov[idx]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        starts.append(np.linalg.solve(a, y[idx]))
    if not starts:
        raise SingularDesignError("singular design: no start point for the depth search")
    starts = np.array(starts)
    spread = starts.max(axis=0) - starts.min(axis=0)
    scale = 1e-3 * (1.0 + np.abs(starts[0]))
    step0 = np.maximum(spread / 4.0, scale)
    dirs = _sphere_directions(data.d, search.directions, search.seed)
    x, _ = _local_search(lambda etas: _regression_depths(cov, y, wo, etas, dirs), starts, step0, search.rounds)
    q = DepthQuery(x, dirs, exact=False)
    return EstimateResult(x, "regression_depth", w, weighted_regression_depth(data, w, q))


def ols(data: Dataset) -> EstimateResult:
    if data.mode != "regression":
        raise DomainError("OLS needs a regression-mode dataset")
    if np.linalg.matrix_rank(data.points) < data.d:
        raise SingularDesignError("singular design")
    beta = np.linalg.lstsq(data.points, data.responses, rcond=None)[0]
    return EstimateResult(beta, "ols", uniform_weights(data.profile))


def baselines(data: Dataset) -> dict[str, EstimateResult]:
    """Classical homogeneous estimates: sample mean and median, or OLS."""
    if data.n == 0:
        raise DomainError("empty dataset")
    uw = uniform_weights(data.profile)
    if data.mode == "mean":
        return {
            "sample_mean": EstimateResult(data.points.mean(axis=0), "sample_mean", uw),
            "median": EstimateResult(np.median(data.points, axis=0), "median", uw),
        }
    try:
        return {"ols": ols(data)}
    except SingularDesignError as exc:
        return {"ols": EstimateResult(np.full(data.d, np.nan), "ols", uw, error=str(exc))}
