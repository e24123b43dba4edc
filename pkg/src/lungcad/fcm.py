"""Fuzzy c-means clustering of scalar intensities with a spatial pass.

Memberships are point-major: row n of the membership matrix corresponds to
pixel (x, y) through n = x * height + y when the data came from an image.
Fits are deterministic for a fixed seed and safe to run in parallel across
images; reductions use numpy's pairwise summation so results are stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FcmDataError

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class FcmConfig:
    """Clustering controls. fuzzifier > 1; the membership exponent is
    singular at 1."""

    clusters: int
    fuzzifier: float = 2.0
    tolerance: float = 1e-6
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError("clusters must be at least 2")
        if not self.fuzzifier > 1.0:
            raise ValueError("fuzzifier must exceed 1")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True, eq=False)
class MembershipMap:
    """Per-point cluster memberships; every row sums to 1."""

    n_points: int
    clusters: int
    mu: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.mu, dtype=np.float64)
        if arr.shape != (self.n_points, self.clusters):
            raise ValueError(
                f"membership shape {arr.shape} != ({self.n_points}, {self.clusters})"
            )
        rows = arr.sum(axis=1)
        if not np.allclose(rows, 1.0, rtol=0.0, atol=_ROW_SUM_TOL):
            raise ValueError("membership rows must sum to 1")
        object.__setattr__(self, "mu", arr)


@dataclass(frozen=True, eq=False)
class FcmResult:
    centroids: np.ndarray
    memberships: MembershipMap
    objective_trace: np.ndarray
    iterations: int


def _memberships(data: np.ndarray, centroids: np.ndarray, m: float) -> np.ndarray:
    """Membership update: mu_nk = 1 / sum_j (d_nk / d_nj)^(2/(m-1)).

    A point at zero distance from some centroid gets membership 1 there
    (lowest such index on ties) and 0 elsewhere.
    """
    d2 = (data[:, None] - centroids[None, :]) ** 2
    exact = d2.min(axis=1) == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (d2[:, :, None] / d2[:, None, :]) ** (1.0 / (m - 1.0))
        mu = 1.0 / ratios.sum(axis=2)
    if exact.any():
        hits = np.argmin(d2[exact], axis=1)
        mu[exact] = 0.0
        mu[np.flatnonzero(exact), hits] = 1.0
    return mu


def _centroids(data: np.ndarray, mu: np.ndarray, m: float,
               previous: np.ndarray) -> np.ndarray:
    """Weighted means with weights mu^m; a weightless cluster keeps its
    previous centroid."""
    w = mu**m
    denom = w.sum(axis=0)
    num = w.T @ data
    out = previous.copy()
    alive = denom > 0.0
    out[alive] = num[alive] / denom[alive]
    return out


def fcm_objective(data, centroids, memberships, m: float) -> float:
    """Weighted within-cluster squared distance sum."""
    data = np.asarray(data, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    mu = memberships.mu if isinstance(memberships, MembershipMap) else np.asarray(memberships)
    if mu.shape != (data.size, centroids.size):
        raise ValueError(
            f"membership shape {mu.shape} inconsistent with "
            f"{data.size} points and {centroids.size} centroids"
        )
    d2 = (data[:, None] - centroids[None, :]) ** 2
    return float(((mu**m) * d2).sum())


def fcm_fit(data, config: FcmConfig) -> FcmResult:
    """Alternate membership and centroid updates until the objective change
    drops below tolerance or max_iter is reached.

    Centroids start at evenly spaced quantiles of the data plus a seeded
    jitter of at most 1e-3, which makes fits reproducible bit for bit.
    """
    data = np.asarray(data, dtype=np.float64).ravel()
    c, m = config.clusters, config.fuzzifier
    if not np.isfinite(data).all():
        raise FcmDataError("data contains non-finite values")
    if data.size < c:
        raise FcmDataError(f"{data.size} points cannot form {c} clusters")
    if np.unique(data).size < c:
        raise FcmDataError(
            f"{np.unique(data).size} distinct values cannot form {c} clusters"
        )
    rng = np.random.default_rng(config.seed)
    levels = (np.arange(c) + 0.5) / c
    centroids = np.quantile(data, levels) + rng.uniform(-1e-3, 1e-3, size=c)

    trace = []
    mu = None
    for _ in range(config.max_iter):
        mu = _memberships(data, centroids, m)
        centroids = _centroids(data, mu, m, centroids)
        trace.append(fcm_objective(data, centroids, mu, m))
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) < config.tolerance:
            break
    # refresh memberships so they answer to the returned centroids
    mu = _memberships(data, centroids, m)
    return FcmResult(
        centroids=centroids,
        memberships=MembershipMap(data.size, c, mu),
        objective_trace=np.asarray(trace),
        iterations=len(trace),
    )


def _window_sums(field: np.ndarray, radius: int) -> np.ndarray:
    """Box sums over (2*radius+1)^2 windows truncated at the borders."""
    w, h = field.shape
    s = np.zeros((w + 1, h + 1))
    s[1:, 1:] = field.cumsum(axis=0).cumsum(axis=1)
    x = np.arange(w)
    y = np.arange(h)
    x0 = np.maximum(x - radius, 0)
    x1 = np.minimum(x + radius + 1, w)
    y0 = np.maximum(y - radius, 0)
    y1 = np.minimum(y + radius + 1, h)
    return (
        s[np.ix_(x1, y1)] - s[np.ix_(x0, y1)] - s[np.ix_(x1, y0)] + s[np.ix_(x0, y0)]
    )


def spatial_regularize(mm: MembershipMap, width: int, height: int,
                       window: int = 3) -> MembershipMap:
    """Re-weight memberships by their neighborhood support.

    mu'_nk is proportional to mu_nk times the window sum of cluster k's
    memberships around n, renormalized per point. Window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    if mm.n_points != width * height:
        raise ValueError(
            f"{mm.n_points} points do not fill a {width}x{height} grid"
        )
    if window == 1:
        return mm
    radius = window // 2
    weighted = np.empty_like(mm.mu)
    for k in range(mm.clusters):
        grid = mm.mu[:, k].reshape(width, height)
        weighted[:, k] = (grid * _window_sums(grid, radius)).ravel()
    weighted /= weighted.sum(axis=1, keepdims=True)
    return MembershipMap(mm.n_points, mm.clusters, weighted)


def select_lesion_cluster(result: FcmResult, override: int | None = None) -> int:
    """Index of the brightest centroid; ties go to the lowest index.

    Pass `override` to force a specific cluster.
    """
    if override is not None:
        if not 0 <= override < result.centroids.size:
            raise ValueError(f"cluster index {override} out of range")
        return override
    return int(np.argmax(result.centroids))
