"""Heavy-tailed innovations and stationary processes with a closed-form extremal index."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .core import ConfigError
from .resample import substream

Family = Literal["frechet", "pareto", "student_t"]
FAMILIES = ("frechet", "pareto", "student_t")
DEFAULT_BURN_IN = 1000


def frechet_from_uniform(u, alpha: float):
    """Inverse CDF of P{Z <= z} = exp(-z**-alpha)."""
    return (-np.log(u)) ** (-1.0 / alpha)


def pareto_from_uniform(u, alpha: float):
    """Inverse survival function of P{Z > z} = z**-alpha, z >= 1."""
    return np.asarray(u, dtype=float) ** (-1.0 / alpha)


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    # Generator.random is on [0, 1); reflect onto (0, 1] so logs and inverse powers stay finite.
    return 1.0 - rng.random(size)


def sample_frechet(alpha: float, rng: np.random.Generator, size=None):
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    # U = 1 gives -log U = 0; nudge to keep the variate finite
    u = np.minimum(_open_uniform(rng, size), np.nextafter(1.0, 0.0))
    z = frechet_from_uniform(u, alpha)
    return float(z) if size is None else z


def sample_pareto(alpha: float, rng: np.random.Generator, size=None):
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    return pareto_from_uniform(_open_uniform(rng, size), alpha)


def sample_gamma(shape: float, rng: np.random.Generator, size=None):
    """Gamma(shape, 1) variates valid for any shape > 0.

    Shapes below one are boosted: G(a) = G(a + 1) * U**(1/a).
    """
    if not shape > 0:
        raise ConfigError(f"gamma shape must be positive, got {shape}")
    if shape >= 1:
        return rng.standard_gamma(shape, size)
    g = rng.standard_gamma(shape + 1.0, size)
    return g * _open_uniform(rng, size) ** (1.0 / shape)


def sample_student_t(nu: float, rng: np.random.Generator, size=None):
    """Student-t with ``nu`` degrees of freedom as N / sqrt(chi2_nu / nu); fractional nu allowed."""
    if not nu > 0:
        raise ConfigError(f"degrees of freedom must be positive, got {nu}")
    z = rng.standard_normal(size)
    chi2 = 2.0 * sample_gamma(nu / 2.0, rng, size)
    return z / np.sqrt(chi2 / nu)


@dataclass(frozen=True)
class Innovation:
    family: Family = "frechet"
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown innovation family {self.family!r}; expected one of {FAMILIES}")
        if not self.alpha > 0:
            raise ConfigError(f"innovation tail index must be positive, got {self.alpha}")

    @property
    def symmetric(self) -> bool:
        return self.family == "student_t"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "frechet":
            return sample_frechet(self.alpha, rng, size)
        if self.family == "pareto":
            return sample_pareto(self.alpha, rng, size)
        return sample_student_t(self.alpha, rng, size)


@dataclass(frozen=True)
class Armax:
    """X_n = max(b X_{n-1}, (1 - b) Z_n) with standard alpha-Frechet Z."""

    b: float
    alpha: float = 1.0
    burn_in: int = DEFAULT_BURN_IN
    kind: str = field(default="armax", init=False)

    def __post_init__(self):
        if not 0 <= self.b < 1:
            raise ConfigError(f"armax coefficient must lie in [0, 1), got {self.b}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.burn_in < 0:
            raise ConfigError(f"burn-in must be non-negative, got {self.burn_in}")


@dataclass(frozen=True)
class Linear:
    """Y_n = sum_j psi_j Z_{n-j}, j = 0..p."""

    psi: tuple[float, ...]
    innovation: Innovation = Innovation("student_t", 1.0)
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        object.__setattr__(self, "psi", tuple(float(c) for c in self.psi))
        if not self.psi or not all(np.isfinite(self.psi)):
            raise ConfigError("linear process needs a non-empty finite coefficient list")
        if not any(self.psi):
            raise ConfigError("linear process coefficients are all zero")


@dataclass(frozen=True)
class MovingMax:
    """X_k = max_i a_i Z_{k-i+1}, i = 1..m, with positive heavy-tailed Z."""

    a: tuple[float, ...]
    innovation: Innovation = Innovation("pareto", 1.0)
    kind: str = field(default="moving-max", init=False)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(c) for c in self.a))
        if not self.a or not all(c > 0 for c in self.a):
            raise ConfigError("moving-maxima coefficients must all be positive")
        if self.innovation.family == "student_t":
            raise ConfigError("moving-maxima innovations must be positive (frechet or pareto)")


ProcessSpec = Union[Armax, Linear, MovingMax]


def theoretical_theta(spec: ProcessSpec) -> float:
    """Closed-form extremal index of a process spec."""
    if isinstance(spec, Armax):
        return 1.0 - spec.b**spec.alpha
    if isinstance(spec, Linear):
        if not spec.innovation.symmetric:
            raise ConfigError("linear-process formula requires symmetric innovations")
        al = spec.innovation.alpha
        psi = np.asarray(spec.psi)
        plus = max(float(np.max(psi)), 0.0)
        minus = max(float(np.max(-psi)), 0.0)
        return (plus**al + minus**al) / float(np.sum(np.abs(psi) ** al))
    if isinstance(spec, MovingMax):
        w = np.asarray(spec.a) ** spec.innovation.alpha
        return float(w.max() / w.sum())
    raise ConfigError(f"unsupported process spec {spec!r}")


def _armax_path(z: np.ndarray, b: float) -> np.ndarray:
    out = np.empty_like(z)
    prev = float(z[0])
    out[0] = prev
    c = 1.0 - b
    for t in range(1, z.size):
        cand = c * z[t]
        prev = b * prev
        if cand > prev:
            prev = cand
        out[t] = prev
    return out


def gen_process(
    spec: ProcessSpec,
    n: int,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """A length-n sample path, deterministic in (spec, n, seed)."""
    if n < 1:
        raise ConfigError(f"path length must be >= 1, got {n}")
    rng = substream(seed)
    if isinstance(spec, Armax):
        z = sample_frechet(spec.alpha, rng, n + spec.burn_in + 1)
        # index 0 seeds X_0 = Z_0; the burn-in steps are then discarded
        return _armax_path(z, spec.b)[spec.burn_in + 1 :]
    if isinstance(spec, Linear):
        p = len(spec.psi) - 1
        z = spec.innovation.sample(rng, n + p)
        out = np.zeros(n)
        for lag, c in enumerate(spec.psi):
            out += c * z[p - lag : p - lag + n]
        return out
    if isinstance(spec, MovingMax):
        m = len(spec.a)
        z = spec.innovation.sample(rng, n + m - 1)
        out = np.full(n, -np.inf)
        for i, c in enumerate(spec.a):
            np.maximum(out, c * z[m - 1 - i : m - 1 - i + n], out=out)
        return out
    raise ConfigError(f"unsupported process spec {spec!r}")


def spec_to_dict(spec: ProcessSpec) -> dict:
    if isinstance(spec, Armax):
        return {"kind": "armax", "b": spec.b, "alpha": spec.alpha, "burn_in": spec.burn_in}
    if isinstance(spec, Linear):
        return {"kind": "linear", "psi": list(spec.psi), "innovation": spec.innovation.family, "alpha": spec.innovation.alpha}
    return {"kind": "moving-max", "a": list(spec.a), "innovation": spec.innovation.family, "alpha": spec.innovation.alpha}


def spec_from_dict(d: dict) -> ProcessSpec:
    """Inverse of :func:`spec_to_dict`; raises ConfigError on unknown or missing keys."""
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "armax":
            allowed = {"b", "alpha", "burn_in"}
            _reject_extra(d, allowed)
            return Armax(float(d["b"]), float(d.get("alpha", 1.0)), int(d.get("burn_in", DEFAULT_BURN_IN)))
        if kind == "linear":
            _reject_extra(d, {"psi", "innovation", "alpha"})
            inn = Innovation(d.get("innovation", "student_t"), float(d.get("alpha", 1.0)))
            return Linear(tuple(d["psi"]), inn)
        if kind in ("moving-max", "moving_max", "mm"):
            _reject_extra(d, {"a", "innovation", "alpha"})
            inn = Innovation(d.get("innovation", "pareto"), float(d.get("alpha", 1.0)))
            return MovingMax(tuple(d["a"]), inn)
    except KeyError as exc:
        raise ConfigError(f"process {kind!r} is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value in process block {d!r}: {exc}") from None
    raise ConfigError(f"unknown process kind {kind!r}; expected armax, linear or moving-max")


def _reject_extra(d: dict, allowed: set) -> None:
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown process keys {sorted(extra)}")


# Process definitions used throughout the simulation tables.
TABLE_LINEAR_PSI = (0.50, 0.20, 0.10)
TABLE_MOVING_MAX_A = (0.80, 0.20, 0.40)


def table_armax(theta: float) -> Armax:
    """Armax process with alpha = 1 and b = 1 - theta."""
    return Armax(round(1.0 - theta, 12), 1.0)


def table_linear(alpha: float) -> Linear:
    return Linear(TABLE_LINEAR_PSI, Innovation("student_t", alpha))


def table_moving_max(alpha: float) -> MovingMax:
    return MovingMax(TABLE_MOVING_MAX_A, Innovation("pareto", alpha))
