"""Small statistics helpers: jackknife errors, Wilson intervals, weighted fits."""

from __future__ import annotations

import math

import numpy as np


def mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    """Mean with leave-one-out jackknife standard error (equals the SEM)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return math.nan, math.nan
    if n == 1:
        return float(x[0]), math.nan
    m = float(x.mean())
    return m, float(x.std(ddof=1) / math.sqrt(n))


def jackknife_statistic(samples: np.ndarray, statistic) -> tuple[float, float]:
    """Leave-one-out jackknife of an arbitrary statistic of a sample array."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    full = float(statistic(samples))
    if n < 2:
        return full, math.nan
    loo = np.empty(n)
    for i in range(n):
        loo[i] = statistic(np.delete(samples, i, axis=0))
    var = (n - 1) / n * float(((loo - loo.mean()) ** 2).sum())
    return full, math.sqrt(var)


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 1.0
    p = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    centre = (p + z2 / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z2 / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def weighted_linear_fit(
    x: np.ndarray, y: np.ndarray, sigma: np.ndarray
) -> tuple[float, float, float, float, float]:
    """Weighted least squares y = a + b x.

    Returns (slope, slope_stderr, intercept, intercept_stderr, r_squared).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    w = 1.0 / sigma**2
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    sxy = (w * (x - xm) * (y - ym)).sum()
    slope = sxy / sxx
    intercept = ym - slope * xm
    slope_se = math.sqrt(1.0 / sxx)
    intercept_se = math.sqrt(1.0 / sw + xm**2 / sxx)
    resid = y - intercept - slope * x
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(slope_se), float(intercept), float(intercept_se), float(r2)
