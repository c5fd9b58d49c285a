"""Dyadic block maxima, the max-spectrum and its regression-based tail-index estimate.

The max-spectrum of a series of length n is the sequence

    Y_j = mean_k log2 D(j, k),   j = 1 .. floor(log2 n),

where D(j, k) is the maximum of the k-th disjoint block of 2**j observations.
For heavy-tailed data Y_j is asymptotically affine in j with slope 1/alpha,
so a linear-regression slope of Y over a range of scales estimates 1/alpha.
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .core import ConfigError, EstimationError, as_series

CONSTRAINT_TOL = 1e-12
GLS_COV_REPS = 2000
GLS_COV_SEED = 20090212


def max_scale(n: int) -> int:
    """floor(log2 n), the largest dyadic scale available for n samples."""
    if n < 1:
        raise ConfigError(f"series length must be positive, got {n}")
    return int(n).bit_length() - 1


def block_maxima(x: Sequence[float] | np.ndarray, j: int) -> np.ndarray:
    """Maxima over the floor(n / 2**j) disjoint blocks of length 2**j.

    Trailing observations that do not fill a whole block are discarded.

    >>> block_maxima([5, 3, 9, 1, 7], 1)
    array([5., 9.])
    """
    x = as_series(x)
    if j < 1:
        raise ConfigError(f"scale must be >= 1, got {j}")
    size = 1 << j
    nb = x.size // size
    if nb < 1:
        raise ConfigError(f"scale {j} needs at least {size} samples, series has {x.size}")
    return x[: nb * size].reshape(nb, size).max(axis=1)


def log2_positive(x: np.ndarray) -> np.ndarray:
    """log2 of ``x`` with every non-positive entry mapped to -inf."""
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    out[pos] = np.log2(x[pos])
    return out


def log_spectrum_rows(logx: np.ndarray, top: int | None = None) -> np.ndarray:
    """Max-spectra of each row of a 2-D array of log2-values.

    Works on logarithms so that a single ``log2`` pass serves every scale; block
    maxima are built as a pyramid (level j+1 is the pairwise max of level j).
    Returns shape ``(rows, top)`` with column ``j-1`` holding Y_j; a level that
    contains a block maximum of -inf (i.e. a non-positive maximum) is -inf.
    """
    logx = np.atleast_2d(logx)
    J = max_scale(logx.shape[1])
    top = J if top is None else min(top, J)
    out = np.empty((logx.shape[0], top))
    m = logx
    for j in range(top):
        half = m.shape[1] // 2
        m = np.maximum(m[:, 0 : 2 * half : 2], m[:, 1 : 2 * half : 2])
        out[:, j] = m.mean(axis=1)
    return out


@dataclass(frozen=True)
class MaxSpectrum:
    """Per-scale (j, n_j, Y_j) with a validity flag; invalid levels carry NaN."""

    n: int
    j: np.ndarray
    n_j: np.ndarray
    Y: np.ndarray
    valid: np.ndarray

    @property
    def top(self) -> int:
        return int(self.j[-1])

    def y(self, j: int) -> float:
        self._check(j)
        return float(self.Y[j - 1])

    def is_valid(self, j: int) -> bool:
        return 1 <= j <= self.top and bool(self.valid[j - 1])

    def _check(self, j: int) -> None:
        if not 1 <= j <= self.top:
            raise ConfigError(f"scale {j} outside 1..{self.top}")
        if not self.valid[j - 1]:
            raise EstimationError(f"scale {j} is invalid (contains a non-positive block maximum)")

    def to_csv(self, fh: TextIO | None = None) -> str:
        """Write columns j, n_j, Y_j, valid; returns the text when ``fh`` is None."""
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "n_j", "Y_j", "valid"])
        for j, nj, y, v in zip(self.j, self.n_j, self.Y, self.valid):
            w.writerow([int(j), int(nj), repr(float(y)) if v else "", int(v)])
        return buf.getvalue() if fh is None else ""


def max_spectrum(x: Sequence[float] | np.ndarray) -> MaxSpectrum:
    """Compute Y_j for every j = 1 .. floor(log2 n).

    >>> max_spectrum([1, 2, 4, 8]).Y
    array([2., 3.])
    """
    x = as_series(x, min_length=2)
    Y = log_spectrum_rows(log2_positive(x)[None, :])[0]
    valid = np.isfinite(Y)
    J = Y.size
    j = np.arange(1, J + 1)
    return MaxSpectrum(
        n=x.size,
        j=j,
        n_j=x.size >> j,
        Y=np.where(valid, Y, np.nan),
        valid=valid,
    )


@dataclass(frozen=True)
class WeightVector:
    """Slope-functional weights w_0..w_ell applied to Y_{j_start} .. Y_{j_start+ell}."""

    j_start: int
    ell: int
    w: np.ndarray
    method: str = "wls"

    def __post_init__(self):
        if self.ell < 1 or len(self.w) != self.ell + 1:
            raise ConfigError(f"need ell >= 1 and ell+1 weights, got ell={self.ell}, {len(self.w)} weights")

    def check_constraints(self, tol: float = CONSTRAINT_TOL) -> None:
        i = np.arange(self.ell + 1)
        s0, s1 = float(np.sum(self.w)), float(np.dot(i, self.w))
        if abs(s0) > tol or abs(s1 - 1.0) > tol:
            raise ArithmeticError(f"weight constraints violated: sum={s0:.3e}, sum(i*w)-1={s1 - 1:.3e}")


def _gls_slope_weights(cov: np.ndarray) -> np.ndarray:
    """Row of (X' S^-1 X)^-1 X' S^-1 giving the slope, X = [1, i]."""
    k = cov.shape[0]
    X = np.column_stack([np.ones(k), np.arange(k, dtype=float)])
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("covariance matrix is not positive definite") from exc
    # whitened design: (L^-1 X)
    Xw = np.linalg.solve(L, X)
    A = Xw.T @ Xw
    B = np.linalg.solve(L.T, Xw)  # S^-1 X
    w = np.linalg.solve(A, B.T)[1]
    return _enforce_constraints(w)


def _enforce_constraints(w: np.ndarray) -> np.ndarray:
    # Project back onto {sum w = 0, sum i w = 1} to strip rounding from the solves.
    k = w.size
    i = np.arange(k, dtype=float)
    C = np.vstack([np.ones(k), i])
    resid = np.array([0.0, 1.0]) - C @ w
    return w + C.T @ np.linalg.solve(C @ C.T, resid)


def wls_weights(j_start: int, ell: int) -> WeightVector:
    """Weighted-least-squares slope weights with Var(Y_j) proportional to 2**j.

    >>> wls_weights(1, 1).w
    array([-1.,  1.])
    """
    if ell < 1:
        raise ConfigError(f"span ell must be >= 1, got {ell}")
    i = np.arange(ell + 1, dtype=float)
    v = 2.0 ** (-i)  # inverse variance; the common 2**-j_start factor cancels
    ibar = np.dot(v, i) / v.sum()
    d = i - ibar
    w = v * d / np.dot(v, d * d)
    return WeightVector(j_start, ell, _enforce_constraints(w), "wls")


def ols_weights(j_start: int, ell: int) -> WeightVector:
    """Ordinary-least-squares slope weights (reference only; not recommended)."""
    if ell < 1:
        raise ConfigError(f"span ell must be >= 1, got {ell}")
    i = np.arange(ell + 1, dtype=float)
    d = i - i.mean()
    return WeightVector(j_start, ell, _enforce_constraints(d / np.dot(d, d)), "ols")


def gls_weights(j_start: int, ell: int, cov: np.ndarray) -> WeightVector:
    """Generalized-least-squares slope weights under the covariance of (Y_j_start..Y_j_start+ell)."""
    cov = np.asarray(cov, dtype=float)
    if ell < 1:
        raise ConfigError(f"span ell must be >= 1, got {ell}")
    if cov.shape != (ell + 1, ell + 1):
        raise ConfigError(f"covariance must be {(ell + 1, ell + 1)}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=0):
        raise ConfigError("covariance matrix is not symmetric")
    return WeightVector(j_start, ell, _gls_slope_weights(cov), "gls")


_cov_cache: dict[tuple[int, int, int], np.ndarray] = {}
_cov_lock = threading.Lock()


def frechet_spectrum_cov(n: int, reps: int = GLS_COV_REPS, seed: int = GLS_COV_SEED) -> np.ndarray:
    """Monte Carlo covariance of (Y_1..Y_J) for iid standard 1-Frechet samples of length n.

    The result is deterministic in (n, reps, seed) and cached. Scaling with the
    tail index only multiplies the matrix by a constant, which GLS weights ignore.
    """
    key = (int(n), int(reps), int(seed))
    cached = _cov_cache.get(key)
    if cached is not None:
        return cached
    with _cov_lock:
        if key in _cov_cache:
            return _cov_cache[key]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(n,))))
        chunk = max(1, min(reps, 2**22 // max(n, 1)))
        parts = []
        done = 0
        while done < reps:
            b = min(chunk, reps - done)
            # log2 of a 1-Frechet variate is -log2(-ln U)
            logz = -np.log2(-np.log(rng.random((b, n))))
            parts.append(log_spectrum_rows(logz))
            done += b
        Y = np.vstack(parts)
        cov = np.cov(Y, rowvar=False)
        cov.setflags(write=False)
        _cov_cache[key] = cov
        return cov


def regression_weights(spec_n: int, j_start: int, ell: int, method: str = "wls") -> WeightVector:
    """Weights for scale range j_start..j_start+ell of a length-``spec_n`` spectrum."""
    if method == "wls":
        return wls_weights(j_start, ell)
    if method == "gls":
        cov = frechet_spectrum_cov(spec_n)
        sub = cov[j_start - 1 : j_start + ell, j_start - 1 : j_start + ell]
        return gls_weights(j_start, ell, sub)
    if method == "ols":
        return ols_weights(j_start, ell)
    raise ConfigError(f"unknown regression method {method!r}; expected 'wls' or 'gls'")


def alpha_hat(spec: MaxSpectrum, weights: WeightVector) -> float:
    """alpha = 1 / sum_i w_i Y_{j_start+i}."""
    lo, hi = weights.j_start, weights.j_start + weights.ell
    if lo < 1 or hi > spec.top:
        raise ConfigError(f"regression range {lo}..{hi} outside spectrum scales 1..{spec.top}")
    if not np.all(spec.valid[lo - 1 : hi]):
        bad = [j for j in range(lo, hi + 1) if not spec.valid[j - 1]]
        raise EstimationError(f"regression range {lo}..{hi} contains invalid scales {bad}")
    slope = float(np.dot(weights.w, spec.Y[lo - 1 : hi]))
    if not slope > 0:
        raise EstimationError(f"non-positive slope {slope:.4g} over scales {lo}..{hi}")
    return 1.0 / slope


@dataclass(frozen=True)
class AlphaEstimate:
    """Tail-index estimates alpha(j), each regressing over scales j .. top_used."""

    scales: np.ndarray
    alpha: np.ndarray
    method: str
    top_used: int

    def at(self, j: int) -> float:
        return float(self.alpha[int(np.flatnonzero(self.scales == j)[0])])


def scale_alphas(spec: MaxSpectrum, method: str = "wls", scales: Sequence[int] | None = None) -> AlphaEstimate:
    """alpha(j) for each candidate scale, regressing over j .. floor(log2 n) - 1.

    The top scale is left out since it averages at most two block maxima.
    Candidate scales default to every valid j with a span of at least one.
    """
    top_used = spec.top - 1
    if scales is None:
        scales = [j for j in range(1, top_used) if spec.is_valid(j)]
    scales = np.asarray(list(scales), dtype=int)
    alphas = np.empty(scales.size)
    for k, j in enumerate(scales):
        ell = top_used - int(j)
        if ell < 1:
            raise ConfigError(f"scale {j} leaves no regression span below scale {top_used}")
        alphas[k] = alpha_hat(spec, regression_weights(spec.n, int(j), ell, method))
    return AlphaEstimate(scales, alphas, method, top_used)


def c_statistic(spec: MaxSpectrum, alpha: float, j: int) -> float:
    """C(j) = Y_j - j / alpha (the intercept statistic)."""
    return spec.y(j) - j / alpha
