"""Kruskal-Wallis screening of scale ranges and automatic selection of a stable range."""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
from scipy import stats

from .core import ConfigError
from .resample import ThetaSamples


def _kw_statistic(ranks: np.ndarray, sizes: Sequence[int], tie_factor: float) -> float:
    N = ranks.size
    bounds = np.cumsum([0, *sizes])
    ssq = sum(ranks[a:b].sum() ** 2 / (b - a) for a, b in zip(bounds[:-1], bounds[1:]))
    h = 12.0 / (N * (N + 1)) * ssq - 3.0 * (N + 1)
    return max(h / tie_factor, 0.0)


def _prepare(groups) -> tuple[np.ndarray, list[int], float]:
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ConfigError(f"Kruskal-Wallis needs at least 2 groups, got {len(groups)}")
    if any(g.size == 0 for g in groups):
        raise ConfigError("Kruskal-Wallis groups must be non-empty")
    pooled = np.concatenate(groups)
    if pooled.size < 3:
        raise ConfigError(f"Kruskal-Wallis needs at least 3 observations, got {pooled.size}")
    _, counts = np.unique(pooled, return_counts=True)
    N = pooled.size
    tie_factor = 1.0 - float(np.sum(counts.astype(float) ** 3 - counts)) / (N**3 - N)
    return pooled, [g.size for g in groups], tie_factor


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """H statistic on mid-ranks with tie correction, and its chi-square(k-1) p-value.

    When every observation is identical the test is undefined; (0.0, 1.0) is returned.

    >>> h, p = kruskal_wallis([[1, 2, 3], [4, 5, 6]])
    >>> round(h, 4), round(p, 4)
    (3.8571, 0.0495)
    """
    pooled, sizes, tie_factor = _prepare(groups)
    if tie_factor <= 0:
        return 0.0, 1.0
    h = _kw_statistic(stats.rankdata(pooled), sizes, tie_factor)
    return h, float(stats.chi2.sf(h, len(sizes) - 1))


def kruskal_wallis_exact(groups: Sequence[Sequence[float]], max_n: int = 10) -> tuple[float, float]:
    """Exact permutation p-value P{H >= H_obs} by enumerating all group assignments."""
    pooled, sizes, tie_factor = _prepare(groups)
    N = pooled.size
    if N > max_n:
        raise ConfigError(f"exact test limited to {max_n} observations, got {N}")
    if tie_factor <= 0:
        return 0.0, 1.0
    ranks = stats.rankdata(pooled)
    h_obs = _kw_statistic(ranks, sizes, tie_factor)
    hits = total = 0
    for order in _assignments(list(range(N)), sizes):
        h = _kw_statistic(ranks[order], sizes, tie_factor)
        hits += h >= h_obs - 1e-12
        total += 1
    return h_obs, hits / total


def _assignments(items: list[int], sizes: Sequence[int]):
    """Every way of splitting ``items`` into consecutive groups of the given sizes."""
    if len(sizes) == 1:
        yield list(items)
        return
    for first in itertools.combinations(items, sizes[0]):
        rest = [i for i in items if i not in first]
        for tail in _assignments(rest, sizes[1:]):
            yield list(first) + tail


@dataclass(frozen=True)
class ScaleRange:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigError(f"scale range {self.lo}..{self.hi} is empty")

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __str__(self) -> str:
        return f"{self.lo}:{self.hi}"

    @classmethod
    def parse(cls, text: str) -> "ScaleRange":
        try:
            lo, _, hi = text.partition(":")
            return cls(int(lo), int(hi or lo))
        except ValueError:
            raise ConfigError(f"bad scale range {text!r}; expected 'j1:j2'") from None


@dataclass(frozen=True)
class PValueMatrix:
    """p[a, b] = Kruskal-Wallis p-value over scales[a]..scales[b] for a < b; NaN elsewhere."""

    scales: np.ndarray
    p: np.ndarray

    def __call__(self, j1: int, j2: int) -> float:
        if not j1 < j2:
            raise ConfigError(f"p-values are defined for j1 < j2, got {j1}, {j2}")
        base = int(self.scales[0])
        return float(self.p[j1 - base, j2 - base])

    def passing(self, threshold: float = 0.05) -> np.ndarray:
        """0/1 matrix: 1 exactly where p >= threshold (upper triangle only)."""
        with np.errstate(invalid="ignore"):
            return (self.p >= threshold).astype(int)

    def to_csv(self, fh: TextIO | None = None, threshold: float | None = None) -> str:
        """Write the matrix with a j1 column and one column per j2.

        With ``threshold`` the 0/1 pass indicator is written instead of p.
        """
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [int(j) for j in self.scales[1:]]
        w.writerow(["j1"] + [f"j2={j}" for j in cols])
        mark = None if threshold is None else self.passing(threshold)
        for a, j1 in enumerate(self.scales[:-1]):
            row = [int(j1)]
            for b in range(1, self.scales.size):
                if b <= a:
                    row.append("")
                elif mark is None:
                    row.append(repr(float(self.p[a, b])))
                else:
                    row.append(int(mark[a, b]))
            w.writerow(row)
        return buf.getvalue() if fh is None else ""


def heatmap_export(m: PValueMatrix, path: str | Path, threshold: float = 0.05) -> tuple[Path, Path]:
    """Write the p-value matrix to ``path`` and its 0/1 pass indicator next to it (``*_pass.csv``)."""
    path = Path(path)
    companion = path.with_name(f"{path.stem}_pass{path.suffix or '.csv'}")
    with path.open("w", newline="", encoding="utf-8") as fh:
        m.to_csv(fh)
    with companion.open("w", newline="", encoding="utf-8") as fh:
        m.to_csv(fh, threshold=threshold)
    return path, companion


def default_window(n: int, available: Sequence[int]) -> ScaleRange:
    """Scales 3 .. floor(log2 n) - 2, clipped to the scales that carry samples."""
    available = sorted(int(j) for j in available)
    top = max(int(n).bit_length() - 1 - 2, 1)
    inside = [j for j in available if 3 <= j <= top]
    if len(inside) < 2:
        inside = available
    return ScaleRange(inside[0], inside[-1])


def pvalue_matrix(samples: ThetaSamples, window: ScaleRange | None = None) -> PValueMatrix:
    if window is None:
        window = default_window(samples.n, samples.scales)
    scales = np.arange(window.lo, window.hi + 1)
    if scales.size < 2:
        raise ConfigError(f"window {window} must contain at least two scales")
    groups = [samples.at(int(j)) for j in scales]
    m = scales.size
    p = np.full((m, m), np.nan)
    for a in range(m):
        for b in range(a + 1, m):
            p[a, b] = kruskal_wallis(groups[a : b + 1])[1]
    return PValueMatrix(scales, p)


def select_range(m: PValueMatrix, threshold: float = 0.05) -> tuple[ScaleRange, bool]:
    """Longest range with p >= threshold, ties to the lowest start.

    Returns ``(range, found)``; when no range passes, the lower-middle scale of
    the window is returned with ``found=False`` so callers can flag the result
    for visual inspection.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    mark = m.passing(threshold)
    k = m.scales.size
    for length in range(k, 1, -1):
        for a in range(0, k - length + 1):
            if mark[a, a + length - 1]:
                return ScaleRange(int(m.scales[a]), int(m.scales[a + length - 1])), True
    mid = int(m.scales[(k - 1) // 2])
    return ScaleRange(mid, mid), False


@dataclass(frozen=True)
class Selection:
    range: ScaleRange
    found: bool
    estimate: float
    matrix: PValueMatrix
    method: str

    def as_dict(self) -> dict:
        return {
            "j_lo": self.range.lo,
            "j_hi": self.range.hi,
            "pooled_median": self.estimate,
            "method": self.method,
            "found": self.found,
        }


def auto_select(
    samples: ThetaSamples,
    window: ScaleRange | None = None,
    threshold: float = 0.05,
) -> Selection:
    """Run the screening, pick the stable range and pool its median."""
    m = pvalue_matrix(samples, window)
    rng, found = select_range(m, threshold)
    est = float(np.median(samples.pooled(rng.lo, rng.hi)))
    return Selection(rng, found, est, m, samples.method)
