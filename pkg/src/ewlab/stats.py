"""Bootstrap intervals, normality tests, and power-law fits.

Everything randomized takes an explicit RngStreamKey so results are pure
functions of (data, key).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr  # standard normal CDF, vectorized

from .errors import ConfigurationError
from .rng import RngStreamKey


def _resolve_statistic(statistic):
    if callable(statistic):
        return statistic
    if statistic == "mean":
        return lambda a, axis=-1: np.mean(a, axis=axis)
    if statistic == "variance":
        return lambda a, axis=-1: np.var(a, ddof=1, axis=axis)
    raise ConfigurationError(f"unknown statistic {statistic!r}")


def bootstrap_ci(
    data,
    statistic="mean",
    n_boot: int = 2000,
    level: float = 0.95,
    key: RngStreamKey | None = None,
) -> tuple:
    """Percentile bootstrap interval for mean/variance (or a callable taking
    an `axis` argument).  Deterministic given `key`."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 1 or data.size < 10:
        raise ConfigurationError("bootstrap_ci needs a 1-D sample of size >= 10")
    if not 0.5 < level < 1.0:
        raise ConfigurationError("level must be in (0.5, 1)")
    if np.ptp(data) == 0.0:
        stat = _resolve_statistic(statistic)
        v = float(stat(data))
        return (v, v)
    rng = (key or RngStreamKey(0)).generator()
    stat = _resolve_statistic(statistic)
    n = data.size
    idx = rng.integers(0, n, size=(n_boot, n))
    reps = stat(data[idx], axis=-1)
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(reps, [alpha, 1.0 - alpha])
    return (float(lo), float(hi))


def ks_test_normal(data) -> tuple:
    """One-sample Kolmogorov-Smirnov test against N(0,1).

    Returns (D, p).  The p-value uses the asymptotic Kolmogorov series with
    the finite-n correction factor sqrt(n) + 0.12 + 0.11/sqrt(n).
    """
    x = np.sort(np.asarray(data, dtype=np.float64))
    n = x.size
    if n < 20:
        raise ConfigurationError("ks_test_normal needs n >= 20")
    cdf = ndtr(x)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    d = max(d_plus, d_minus)
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * d
    p = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        p += term
        if abs(term) < 1e-12:
            break
    return float(d), float(min(max(p, 0.0), 1.0))


def _ad_cdf(z: float) -> float:
    """Asymptotic CDF of the Anderson-Darling statistic (fully specified
    null), Marsaglia's rational approximation."""
    if z <= 0:
        return 0.0
    if z < 2.0:
        return (
            math.exp(-1.2337141 / z)
            / math.sqrt(z)
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
        )
    return math.exp(
        -math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
    )


def ad_test_normal(data) -> tuple:
    """Anderson-Darling statistic and asymptotic p-value against N(0,1)."""
    x = np.sort(np.asarray(data, dtype=np.float64))
    n = x.size
    if n < 20:
        raise ConfigurationError("ad_test_normal needs n >= 20")
    cdf = np.clip(ndtr(x), 1e-15, 1.0 - 1e-15)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (np.log(cdf) + np.log(1.0 - cdf[::-1])))
    return float(a2), float(min(max(1.0 - _ad_cdf(a2), 0.0), 1.0))


def sample_moments(data) -> dict:
    """Sample skewness and excess kurtosis (biased, moment form)."""
    x = np.asarray(data, dtype=np.float64)
    c = x - x.mean()
    m2 = np.mean(c**2)
    if m2 == 0:
        return {"skew": 0.0, "exkurt": 0.0}
    return {
        "skew": float(np.mean(c**3) / m2**1.5),
        "exkurt": float(np.mean(c**4) / m2**2 - 3.0),
    }


def powerlaw_fit(pairs) -> tuple:
    """Weighted least-squares fit of log(cov) = a + slope * log|y|.

    `pairs` is an iterable of (|y|, cov, se) with all cov > 0; weights are
    the delta-method ones (cov/se)^2, or uniform when se <= 0.  Returns
    (slope, (lo, hi)) with a fixed-weight 95% interval.
    """
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 4:
        raise ConfigurationError("powerlaw_fit needs >= 4 (|y|, cov, se) rows")
    y, cov, se = arr.T
    if np.any(cov <= 0) or np.any(y <= 0):
        raise ConfigurationError("powerlaw_fit requires positive |y| and cov")
    w = np.where(se > 0, (cov / np.where(se > 0, se, 1.0)) ** 2, 1.0)
    lx, ly = np.log(y), np.log(cov)
    X = np.stack([np.ones_like(lx), lx], axis=1)
    xtw = X.T * w
    cov_mat = np.linalg.inv(xtw @ X)
    coef = cov_mat @ (xtw @ ly)
    slope = float(coef[1])
    half = 1.959963984540054 * math.sqrt(cov_mat[1, 1])
    return slope, (slope - half, slope + half)
