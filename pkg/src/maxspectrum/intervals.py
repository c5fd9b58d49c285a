"""Confidence intervals for the extremal index."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .core import ConfigError


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    kind: str
    scales: tuple[int, int] | None = None

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.scales is not None:
            d["scales"] = f"{self.scales[0]}:{self.scales[1]}"
        return d


def _check_level(q: float) -> None:
    if not 0 < q < 1:
        raise ConfigError(f"confidence level must lie in (0, 1), got {q}")


def normal_critical_value(q: float) -> float:
    """Two-sided standard-normal critical value, e.g. 1.95996 for q = 0.95."""
    _check_level(q)
    return float(stats.norm.ppf(0.5 + q / 2.0))


def ci_normal(theta_hat: float, n_j: int, q: float = 0.95, scale: int | None = None) -> ConfidenceInterval:
    """theta_hat +/- z * theta_hat * pi * sqrt(1 / (6 n_j)), clamped to [0, 1].

    The half-width follows from the asymptotic variance theta**2 pi**2 / 6 of
    theta(j) with n_j block maxima.
    """
    if n_j < 1:
        raise ConfigError(f"block count must be >= 1, got {n_j}")
    half = normal_critical_value(q) * theta_hat * math.pi * math.sqrt(1.0 / (6.0 * n_j))
    lo = min(max(theta_hat - half, 0.0), 1.0)
    hi = min(max(theta_hat + half, 0.0), 1.0)
    return ConfidenceInterval(lo, hi, q, "normal", None if scale is None else (scale, scale))


def ci_quantile(
    pooled: Sequence[float] | np.ndarray,
    q: float = 0.95,
    scales: tuple[int, int] | None = None,
) -> ConfidenceInterval:
    """Empirical (1-q)/2 and (1+q)/2 quantiles of pooled resampled estimates.

    Quantiles interpolate linearly between order statistics (NumPy's default
    ``method="linear"``), the one convention used across the package.
    """
    _check_level(q)
    pooled = np.asarray(pooled, dtype=float).ravel()
    if pooled.size == 0:
        raise ConfigError("cannot form a quantile interval from an empty pool")
    lo, hi = np.quantile(pooled, [(1.0 - q) / 2.0, (1.0 + q) / 2.0])
    lo, hi = float(np.clip(lo, 0.0, 1.0)), float(np.clip(hi, 0.0, 1.0))
    return ConfidenceInterval(lo, hi, q, "quantile", scales)
