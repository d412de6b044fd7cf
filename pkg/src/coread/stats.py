"""Small statistics kernels: fractional ranking, Pearson/Spearman, box and density summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateInputError, EmptyInputError


def fractional_ranks(values: Sequence[float], *, descending: bool = False) -> np.ndarray:
    """0-based ordinal positions with ties replaced by the mean of the positions they span."""
    x = np.asarray(values, dtype=float)
    n = x.size
    order = np.argsort(-x if descending else x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(n, dtype=float)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0
        i = j + 1
    return ranks


def _t_two_sided(r: float, n: int) -> float:
    if n <= 2:
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Product-moment correlation and its two-sided t-test p-value."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInputError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise DegenerateInputError("need at least 3 paired observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return r, _t_two_sided(r, x.size)


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Pearson correlation of mean-tie fractional ranks."""
    if len(xs) != len(ys):
        raise DegenerateInputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    rx = fractional_ranks(xs)
    ry = fractional_ranks(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise DegenerateInputError("zero rank variance")
    return pearson_r(rx, ry)


@dataclass(frozen=True)
class BoxSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def quantile_summary(values: Sequence[float], whisker: float = 1.5) -> BoxSummary:
    """Five-number summary with Tukey fences at *whisker* x IQR.

    Quartiles use linear interpolation between closest ranks.
    """
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise EmptyInputError("quantile summary of an empty sequence")
    q1, med, q3 = (float(v) for v in np.quantile(x, [0.25, 0.5, 0.75], method="linear"))
    iqr = q3 - q1
    lo, hi = q1 - whisker * iqr, q3 + whisker * iqr
    inside = x[(x >= lo) & (x <= hi)]
    outliers = tuple(float(v) for v in x[(x < lo) | (x > hi)])
    return BoxSummary(
        min=float(x[0]), q1=q1, median=med, q3=q3, max=float(x[-1]),
        whisker_low=float(inside[0]), whisker_high=float(inside[-1]),
        outliers=outliers,
    )


def silverman_bandwidth(values: Sequence[float]) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), falling back to sd when the IQR is 0."""
    x = np.asarray(values, dtype=float)
    sd = float(np.std(x, ddof=1))
    q1, q3 = np.quantile(x, [0.25, 0.75])
    spread = min(sd, (q3 - q1) / 1.34) if q3 > q1 else sd
    return 0.9 * spread * x.size ** (-0.2)


def density_curve(values: Sequence[float], grid: Sequence[float], bandwidth: float | None = None) -> np.ndarray:
    """Gaussian kernel density estimate of *values* evaluated at *grid*."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateInputError("density estimate needs at least two distinct values")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not (math.isfinite(h) and h > 0):
        raise DegenerateInputError(f"bandwidth {h} is not a positive finite number")
    g = np.asarray(grid, dtype=float)
    z = (g[:, None] - x[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))


def density_grid(values: Sequence[float], points: int = 512, span: float = 4.0) -> np.ndarray:
    """Evenly spaced grid covering the data range padded by *span* bandwidths."""
    x = np.asarray(values, dtype=float)
    h = silverman_bandwidth(x)
    return np.linspace(x.min() - span * h, x.max() + span * h, points)
