"""Threshold-based extremal-index estimators: the runs estimator and Ferro-Segers."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ConfigError, EstimationError, as_series


def runs_estimator(x: Sequence[float] | np.ndarray, u: float, r: int = 1) -> float:
    """Fraction of exceedances at positions 1..n-r followed by r values at or below ``u``.

    The numerator counts X_j >= u >= max(X_{j+1}, ..., X_{j+r}); the denominator
    counts X_j > u, both over j = 1..n-r.

    >>> runs_estimator([5, 5, 1, 1, 1, 1], u=4, r=1)
    0.5
    """
    x = as_series(x, min_length=2)
    n = x.size
    if not 1 <= r < n:
        raise ConfigError(f"run length must satisfy 1 <= r < n, got r={r}, n={n}")
    head = x[: n - r]
    following = sliding_window_view(x[1:], r).max(axis=1)[: n - r]
    den = int(np.count_nonzero(head > u))
    if den == 0:
        raise EstimationError(f"no exceedances of threshold {u!r}")
    num = int(np.count_nonzero((head >= u) & (following <= u)))
    return num / den


def interexceedance_times(x: Sequence[float] | np.ndarray, u: float) -> np.ndarray:
    """Gaps between successive positions where x exceeds ``u``."""
    x = as_series(x)
    return np.diff(np.flatnonzero(x > u))


def ferro_segers_from_times(T: Sequence[int] | np.ndarray) -> float:
    """Ferro-Segers intervals estimator from N - 1 inter-exceedance times.

    >>> ferro_segers_from_times([1, 1, 10])
    0.75
    """
    T = np.asarray(T, dtype=float)
    if T.size < 1:
        raise EstimationError("need at least 2 exceedances")
    N = T.size + 1
    if T.max() <= 2:
        est = 2.0 * T.sum() ** 2 / ((N - 1) * np.sum(T * T))
    else:
        s = T - 1.0
        den = (N - 1) * np.sum(s * (T - 2.0))
        assert den > 0
        est = 2.0 * s.sum() ** 2 / den
    return float(min(1.0, est))


def ferro_segers(x: Sequence[float] | np.ndarray, u: float) -> float:
    T = interexceedance_times(x, u)
    if T.size < 1:
        raise EstimationError(f"fewer than 2 exceedances of threshold {u!r}")
    return ferro_segers_from_times(T)


DEFAULT_QUANTILES = tuple(round(0.90 + 0.005 * i, 3) for i in range(20))


@dataclass(frozen=True)
class SweepRow:
    quantile: float
    threshold: float
    estimator: str
    r: int | None
    estimate: float
    error: str = ""


def threshold_sweep(
    x: Sequence[float] | np.ndarray,
    quantiles: Sequence[float] | None = DEFAULT_QUANTILES,
    estimator: str = "ferro-segers",
    r: int = 1,
    thresholds: Sequence[float] | None = None,
) -> list[SweepRow]:
    """Estimate at a grid of thresholds; failures become row markers, not exceptions.

    Thresholds are the empirical ``quantiles`` of ``x`` (linear interpolation)
    unless raw ``thresholds`` are given, in which case the quantile column
    holds NaN.
    """
    x = as_series(x, min_length=2)
    if estimator not in ("ferro-segers", "runs"):
        raise ConfigError(f"unknown estimator {estimator!r}; expected 'ferro-segers' or 'runs'")
    if thresholds is not None:
        grid = [(float("nan"), float(u)) for u in thresholds]
    else:
        for p in quantiles:
            if not 0 < p < 1:
                raise ConfigError(f"quantile must lie in (0, 1), got {p}")
        grid = [(float(p), float(np.quantile(x, p))) for p in quantiles]
    rows = []
    for p, u in grid:
        try:
            est = ferro_segers(x, u) if estimator == "ferro-segers" else runs_estimator(x, u, r)
            err = ""
        except EstimationError as exc:
            est, err = float("nan"), str(exc)
        rows.append(SweepRow(p, u, estimator, r if estimator == "runs" else None, est, err))
    return rows


def sweep_csv(rows: Sequence[SweepRow], fh: TextIO | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantile", "threshold", "estimator", "parameter", "estimate", "error"])
    for row in rows:
        w.writerow([
            repr(row.quantile),
            repr(row.threshold),
            row.estimator,
            "-" if row.r is None else row.r,
            "" if row.error else repr(row.estimate),
            row.error,
        ])
    return buf.getvalue() if fh is None else ""
