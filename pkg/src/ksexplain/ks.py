"""Kolmogorov-Smirnov bands around normalized CHFs and the interval constants
that parameterize the robust explanation problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .survival import DEFAULT_EPSILON, ChfCurve


def kolmogorov_cdf(x: float, terms: int = 100) -> float:
    """Limiting distribution of sqrt(n) * D_n: 1 - 2 sum (-1)^(i-1) exp(-2 i^2 x^2)."""
    if x <= 0:
        return 0.0
    i = np.arange(1, terms + 1)
    return float(1.0 - 2.0 * np.sum((-1.0) ** (i - 1) * np.exp(-2.0 * i**2 * x * x)))


def ks_quantile(p: float, tol: float = 1e-10) -> float:
    """k with kolmogorov_cdf(k) = p, by bisection."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    lo, hi = 0.0, 1.0
    while kolmogorov_cdf(hi) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = kolmogorov_cdf(mid)
        if abs(q - p) <= tol and hi - lo < 1e-12:
            break
        if q < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ks_band_halfwidth(n: int, gamma: float) -> float:
    """Critical value d_{n,1-gamma}: k/sqrt(n) for n > 10, small-sample form otherwise."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    k = ks_quantile(1.0 - gamma)
    root = np.sqrt(n)
    if n > 10:
        return float(k / root)
    return float(k / (root + 0.12 + 0.11 / root))


def cdf_bounds(f, d: float) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=float)
    return np.maximum(f - d, 0.0), np.minimum(f + d, 1.0)


def chf_delta(chf: ChfCurve, d: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Band halfwidth mapped back to CHF units: (H_m - eps) * d."""
    return max(chf.max_value - epsilon, 0.0) * d


@dataclass(frozen=True)
class KsConfig:
    gamma: float
    n_effective: int
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.n_effective < 1:
            raise ValueError("n_effective must be positive")

    @property
    def halfwidth(self) -> float:
        """0 when gamma == 1 (no bounds)."""
        if self.gamma >= 1.0:
            return 0.0
        return ks_band_halfwidth(self.n_effective, self.gamma)


@dataclass(frozen=True, eq=False)
class ThetaBand:
    lower: np.ndarray
    upper: np.ndarray
    q_upper: float
    r_lower: float


def theta_bounds(H: np.ndarray, log_baseline: np.ndarray, delta, epsilon: float = DEFAULT_EPSILON):
    """Row-wise log-CHF offset bounds for a matrix of curves H (n, m + 1).

    ``delta`` is a scalar or one value per row.
    """
    H = np.atleast_2d(H)
    delta = np.broadcast_to(np.asarray(delta, dtype=float).reshape(-1, 1), (H.shape[0], 1))
    h_max = H[:, -1:]
    lower = np.log(np.maximum(H - delta, epsilon)) - log_baseline
    upper = np.log(np.minimum(H + delta, h_max)) - log_baseline
    return lower, upper


def theta_band(chf_k: ChfCurve, baseline: ChfCurve, delta: float, epsilon: float = DEFAULT_EPSILON) -> ThetaBand:
    """Interval [lower_j, upper_j] for each log offset ln H_j(x_k) - ln H_0j.

    The upper CHF bound is capped at the curve's own maximum and the lower
    bound is floored at epsilon before taking logarithms.
    """
    if chf_k.grid != baseline.grid:
        raise ValueError("curve and baseline live on different time grids")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    lower, upper = theta_bounds(chf_k.values, np.log(baseline.values), delta, epsilon)
    lower, upper = lower[0], upper[0]
    return ThetaBand(lower, upper, float(upper.max()), float(lower.min()))
