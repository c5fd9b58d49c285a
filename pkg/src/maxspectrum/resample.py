"""Permutation/bootstrap resampling and the per-scale extremal-index samples.

Each resampled spectrum Y*_j is compared with the spectrum Y_j of the original
data; the positive part of the mean difference, scaled by alpha(j), gives

    theta(j) = min(2 ** (-alpha(j) * Delta(j)), 1).

Random streams
--------------
All randomness comes from NumPy's PCG64 seeded through ``SeedSequence``.  The
resample drawn at outer iteration ``i`` and inner iteration ``k`` uses

    SeedSequence(entropy, spawn_key=base_key + (i, k))

where ``(entropy, base_key)`` come from the caller's seed (an int seed has an
empty base key). Each resample therefore depends only on the seed and its own
indices, so results do not depend on batching, ordering or worker count.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .core import ConfigError, EstimationError, as_series
from .maxspec import MaxSpectrum, log2_positive, log_spectrum_rows, max_scale, max_spectrum, scale_alphas

SCHEMES = ("permutation", "bootstrap")
SUMMARY_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
_BATCH_ROWS = 256


def seed_sequence(seed: int | np.random.SeedSequence) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def substream(seed: int | np.random.SeedSequence, *key: int) -> np.random.Generator:
    """Generator for the stream ``seed`` extended by the integer path ``key``."""
    ss = seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(child))


def resample_series(
    x: Sequence[float] | np.ndarray,
    scheme: str = "permutation",
    k: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw a permutation (without replacement) or bootstrap (with replacement) sample of size k."""
    x = np.asarray(x, dtype=float)
    n = x.size
    k = n if k is None else int(k)
    rng = np.random.default_rng() if rng is None else rng
    if k < 1:
        raise ConfigError(f"resample size must be >= 1, got {k}")
    if scheme == "permutation":
        if k > n:
            raise ConfigError(f"permutation sample size {k} exceeds series length {n}")
        if k == n:
            return rng.permutation(x)
        return x[rng.choice(n, size=k, replace=False)]
    if scheme == "bootstrap":
        return x[rng.integers(0, n, size=k)]
    raise ConfigError(f"unknown resampling scheme {scheme!r}; expected one of {SCHEMES}")


def delta_j(y: float, y_star: Sequence[float] | np.ndarray, reducer: str = "mean") -> float:
    """Mean (or median) of the positive differences Y*_j - Y_j; 0 when there are none.

    >>> delta_j(2.0, [2.5, 1.5, 3.0])
    0.75
    """
    d = np.asarray(y_star, dtype=float) - y
    pos = d[d > 0]
    if pos.size == 0:
        return 0.0
    return float(np.median(pos) if reducer == "median" else np.mean(pos))


def _delta_rows(diff: np.ndarray, reducer: str) -> np.ndarray:
    """Column-wise positive-part reduction of an (n_in, scales) difference block."""
    pos = diff > 0
    if reducer == "mean":
        cnt = pos.sum(axis=0)
        tot = np.where(pos, diff, 0.0).sum(axis=0)
        return np.divide(tot, cnt, out=np.zeros(diff.shape[1]), where=cnt > 0)
    out = np.zeros(diff.shape[1])
    for s in range(diff.shape[1]):
        p = diff[pos[:, s], s]
        if p.size:
            out[s] = np.median(p)
    return out


def theta_hat_scale(alpha: float, delta: float) -> float:
    """min(2 ** (-alpha * delta), 1): the clamped extremal-index estimate at one scale."""
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if delta < 0:
        raise ConfigError(f"delta must be non-negative, got {delta}")
    return min(2.0 ** (-alpha * delta), 1.0)


@dataclass(frozen=True)
class ResampleConfig:
    scheme: str = "permutation"
    k: int | None = None
    n_in: int = 1
    n_out: int = 200
    seed: int = 0
    reducer: str = "mean"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown resampling scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.n_in < 1 or self.n_out < 1:
            raise ConfigError(f"n_in and n_out must be >= 1, got {self.n_in}, {self.n_out}")
        if self.k is not None and self.k < 2:
            raise ConfigError(f"resample size k must be >= 2, got {self.k}")
        if self.reducer not in ("mean", "median"):
            raise ConfigError(f"reducer must be 'mean' or 'median', got {self.reducer!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "k": self.k,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "seed": int(self.seed),
            "reducer": self.reducer,
        }


@dataclass(frozen=True)
class ThetaSamples:
    """Resampled theta(j) values: ``theta[s]`` holds the n_out estimates at ``scales[s]``."""

    scales: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    n_j: np.ndarray
    method: str
    n: int
    delta: np.ndarray | None = field(default=None, repr=False)

    def index(self, j: int) -> int:
        hit = np.flatnonzero(self.scales == j)
        if hit.size == 0:
            raise ConfigError(f"scale {j} not available; have {self.scales.tolist()}")
        return int(hit[0])

    def at(self, j: int) -> np.ndarray:
        return self.theta[self.index(j)]

    def pooled(self, lo: int, hi: int) -> np.ndarray:
        if lo > hi:
            raise ConfigError(f"empty scale range {lo}..{hi}")
        rows = [self.index(j) for j in range(lo, hi + 1)]
        return self.theta[rows].ravel()

    def medians(self) -> np.ndarray:
        return np.median(self.theta, axis=1)

    def summary_rows(self) -> list[tuple]:
        """(scale, q05, q25, median, q75, q95) per scale, linear-interpolated quantiles."""
        q = np.quantile(self.theta, SUMMARY_QUANTILES, axis=1)
        return [(int(j), *map(float, q[:, s])) for s, j in enumerate(self.scales)]

    def summary_csv(self, fh: TextIO | None = None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "q05", "q25", "median", "q75", "q95"])
        for row in self.summary_rows():
            w.writerow([row[0], *(repr(v) for v in row[1:])])
        return buf.getvalue() if fh is None else ""

    def long_csv(self, fh: TextIO | None = None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "iteration", "theta"])
        for s, j in enumerate(self.scales):
            for it, v in enumerate(self.theta[s]):
                w.writerow([int(j), it, repr(float(v))])
        return buf.getvalue() if fh is None else ""


def candidate_scales(spec: MaxSpectrum, k: int | None = None) -> list[int]:
    """Scales with a valid regression span below the top scale (and reachable by the resample size)."""
    top_used = spec.top - 1
    reach = spec.top if k is None else max_scale(k)
    return [j for j in range(1, top_used) if j <= reach and all(spec.is_valid(i) for i in range(j, top_used + 1))]


def _outer_deltas(args) -> np.ndarray:
    """Delta(j) for a contiguous block of outer iterations; a worker-level unit of work."""
    logx, y, scales, cfg, ss, first, count = args
    n = logx.size
    k = n if cfg.k is None else cfg.k
    cols = np.asarray(scales) - 1
    top = int(np.max(scales))
    out = np.empty((count, len(scales)))
    per_batch = max(1, _BATCH_ROWS // cfg.n_in)
    for b0 in range(0, count, per_batch):
        b1 = min(count, b0 + per_batch)
        rows = np.empty(((b1 - b0) * cfg.n_in, k))
        r = 0
        for i in range(first + b0, first + b1):
            for inner in range(cfg.n_in):
                rows[r] = resample_series(logx, cfg.scheme, k, substream(ss, i, inner))
                r += 1
        ystar = log_spectrum_rows(rows, top)[:, cols]
        diff = (ystar - y).reshape(b1 - b0, cfg.n_in, len(scales))
        for t in range(b1 - b0):
            out[b0 + t] = _delta_rows(diff[t], cfg.reducer)
    return out


def resampled_deltas(
    x: Sequence[float] | np.ndarray,
    cfg: ResampleConfig,
    scales: Sequence[int] | None = None,
    seed: int | np.random.SeedSequence | None = None,
    jobs: int = 1,
) -> tuple[MaxSpectrum, np.ndarray, np.ndarray]:
    """Spectrum of ``x``, the scales used and an (n_scales, n_out) array of Delta(j)."""
    x = as_series(x, min_length=2)
    spec = max_spectrum(x)
    scales = np.asarray(candidate_scales(spec, cfg.k) if scales is None else list(scales), dtype=int)
    if scales.size == 0:
        raise EstimationError("no valid scales with a regression span; series too short or too many zeros")
    for j in scales:
        if not spec.is_valid(int(j)):
            raise EstimationError(f"scale {j} is invalid for this series")
    ss = seed_sequence(cfg.seed if seed is None else seed)
    logx = log2_positive(x)
    y = spec.Y[scales - 1]
    work = []
    chunk = cfg.n_out if jobs <= 1 else -(-cfg.n_out // jobs)
    for first in range(0, cfg.n_out, chunk):
        work.append((logx, y, scales, cfg, ss, first, min(chunk, cfg.n_out - first)))
    if jobs <= 1 or len(work) == 1:
        parts = [_outer_deltas(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_outer_deltas, work))
    return spec, scales, np.vstack(parts).T


def thetas_from_deltas(alpha: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Vectorized theta_hat_scale over an (n_scales, n_out) Delta array."""
    return np.minimum(np.exp2(-alpha[:, None] * delta), 1.0)


def theta_samples(
    x: Sequence[float] | np.ndarray,
    cfg: ResampleConfig | None = None,
    method: str = "wls",
    scales: Sequence[int] | None = None,
    jobs: int = 1,
) -> ThetaSamples:
    """Resampled theta(j) estimates on every usable scale.

    alpha(j) and Y_j are computed once from ``x``; each of the ``n_out`` outer
    iterations draws ``n_in`` fresh resamples, reduces the positive spectrum
    differences to Delta(j) and records one theta(j) per scale. Output is a
    deterministic function of ``x``, ``cfg`` and ``method``.
    """
    cfg = ResampleConfig() if cfg is None else cfg
    x = as_series(x, min_length=2)
    spec = max_spectrum(x)
    if scales is None:
        scales = candidate_scales(spec, cfg.k)
    alphas = scale_alphas(spec, method, scales)
    spec, used, delta = resampled_deltas(x, cfg, alphas.scales, jobs=jobs)
    return ThetaSamples(
        scales=used,
        theta=thetas_from_deltas(alphas.alpha, delta),
        alpha=alphas.alpha,
        n_j=spec.n_j[used - 1],
        method=method,
        n=spec.n,
        delta=delta,
    )


def point_estimate(samples: ThetaSamples, lo: int, hi: int | None = None) -> float:
    """Median of the theta(j) values pooled over scales lo..hi."""
    hi = lo if hi is None else hi
    pool = samples.pooled(lo, hi)
    if pool.size == 0:
        raise ConfigError("empty pool")
    return float(np.median(pool))
