"""Seeded Monte Carlo studies: RMSE by tuning value, automatic scale selection, CI coverage.

Seeds
-----
Replicate ``r`` of process ``p`` draws its sample path from
``SeedSequence(master_seed, spawn_key=(p, r, 0))`` and its resamples from the
stream ``SeedSequence(master_seed, spawn_key=(p, r, 1))`` (extended per outer
and inner iteration as documented in :mod:`maxspectrum.resample`). Replicates
are evaluated independently and aggregated in index order, so tables are a pure
function of the configuration regardless of the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .competitors import DEFAULT_QUANTILES, ferro_segers, runs_estimator
from .core import ConfigError, EstimationError
from .intervals import ci_normal, ci_quantile
from .maxspec import max_spectrum, scale_alphas
from .resample import ResampleConfig, ThetaSamples, candidate_scales, resampled_deltas, thetas_from_deltas
from .scaleselect import auto_select
from .simulate import (
    ProcessSpec,
    gen_process,
    table_armax,
    table_linear,
    table_moving_max,
    spec_from_dict,
    spec_to_dict,
    theoretical_theta,
)

STUDIES = ("rmse", "autoselect", "coverage")
CI_KINDS = ("normal", "quantile")

PRESETS = {
    "desk": {"reps": 100, "n_out": 100, "n_in": 5},
    "full": {"reps": 500, "n_out": 500, "n_in": 25},
}
# auto-selection and interval studies resample one path at a time to keep the spread honest
SINGLE_RESAMPLE = {"n_out": 200, "n_in": 1}


@dataclass(frozen=True)
class StudyProcess:
    label: str
    spec: ProcessSpec
    n: int = 2**13

    @property
    def theta(self) -> float:
        return theoretical_theta(self.spec)

    @property
    def alpha(self) -> float:
        inn = getattr(self.spec, "innovation", None)
        return float(self.spec.alpha if inn is None else inn.alpha)

    def as_dict(self) -> dict:
        return {"label": self.label, "n": self.n, **spec_to_dict(self.spec)}


@dataclass(frozen=True)
class StudyConfig:
    processes: tuple[StudyProcess, ...]
    study: str = "rmse"
    reps: int = 100
    n_in: int = 5
    n_out: int = 100
    scheme: str = "permutation"
    master_seed: int = 1
    methods: tuple[str, ...] = ("wls", "gls")
    runs_r: tuple[int, ...] = (1, 5, 9)
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    coverage_scales: tuple[int, ...] = (4, 5, 6, 7, 8)
    levels: tuple[float, ...] = (0.90, 0.95)
    kw_threshold: float = 0.05
    jobs: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if self.reps < 1:
            raise ConfigError(f"replicate count must be >= 1, got {self.reps}")
        if not self.processes:
            raise ConfigError("study needs at least one process")
        for p in self.processes:
            if p.n < 16:
                raise ConfigError(f"process {p.label}: n={p.n} is too short")
            theoretical_theta(p.spec)
        for m in self.methods:
            if m not in ("wls", "gls"):
                raise ConfigError(f"unknown regression method {m!r}")
        if any(not 0 < q < 1 for q in self.quantiles):
            raise ConfigError("threshold quantiles must lie in (0, 1)")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        ResampleConfig(self.scheme, None, self.n_in, self.n_out, self.master_seed)

    def resample_config(self) -> ResampleConfig:
        return ResampleConfig(self.scheme, None, self.n_in, self.n_out, self.master_seed)

    def as_dict(self) -> dict:
        """Every setting that influences results (``jobs`` does not)."""
        return {
            "study": self.study,
            "reps": self.reps,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "scheme": self.scheme,
            "seed": self.master_seed,
            "methods": list(self.methods),
            "runs_r": list(self.runs_r),
            "quantiles": list(self.quantiles),
            "coverage_scales": list(self.coverage_scales),
            "levels": list(self.levels),
            "kw_threshold": self.kw_threshold,
            "processes": [p.as_dict() for p in self.processes],
        }


_CONFIG_KEYS = {
    "study", "preset", "reps", "n", "n_in", "n_out", "scheme", "seed", "methods", "runs_r",
    "quantiles", "coverage_scales", "levels", "kw_threshold", "jobs", "processes",
}


def config_from_dict(d: dict) -> StudyConfig:
    """Build a StudyConfig from the documented JSON key set (see README)."""
    if not isinstance(d, dict):
        raise ConfigError("study configuration must be a JSON object")
    extra = set(d) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown configuration keys {sorted(extra)}")
    study = d.get("study", "rmse")
    base = dict(PRESETS[d.get("preset", "desk")]) if d.get("preset", "desk") in PRESETS else None
    if base is None:
        raise ConfigError(f"unknown preset {d.get('preset')!r}; expected one of {sorted(PRESETS)}")
    if study in ("autoselect", "coverage"):
        base.update(SINGLE_RESAMPLE)
    n_default = int(d.get("n", 2**13))
    procs = []
    for k, block in enumerate(d.get("processes", [])):
        block = dict(block)
        label = str(block.pop("label", f"P{k}"))
        n = int(block.pop("n", n_default))
        procs.append(StudyProcess(label, spec_from_dict(block), n))
    try:
        return StudyConfig(
            processes=tuple(procs),
            study=study,
            reps=int(d.get("reps", base["reps"])),
            n_in=int(d.get("n_in", base["n_in"])),
            n_out=int(d.get("n_out", base["n_out"])),
            scheme=str(d.get("scheme", "permutation")),
            master_seed=int(d.get("seed", 1)),
            methods=tuple(d.get("methods", ("wls", "gls"))),
            runs_r=tuple(int(r) for r in d.get("runs_r", (1, 5, 9))),
            quantiles=tuple(float(q) for q in d.get("quantiles", DEFAULT_QUANTILES)),
            coverage_scales=tuple(int(j) for j in d.get("coverage_scales", (4, 5, 6, 7, 8))),
            levels=tuple(float(q) for q in d.get("levels", (0.90, 0.95))),
            kw_threshold=float(d.get("kw_threshold", 0.05)),
            jobs=int(d.get("jobs", 1)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration value: {exc}") from None


def read_config_dict(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None


def load_config(path: str | Path) -> StudyConfig:
    return config_from_dict(read_config_dict(path))


# --------------------------------------------------------------------------- replicates

def _seeds(cfg: StudyConfig, p: int, r: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    return (
        np.random.SeedSequence(cfg.master_seed, spawn_key=(p, r, 0)),
        np.random.SeedSequence(cfg.master_seed, spawn_key=(p, r, 1)),
    )


def _rmse_replicate(cfg: StudyConfig, p: int, r: int) -> dict[tuple[str, str], float]:
    proc = cfg.processes[p]
    path_seed, res_seed = _seeds(cfg, p, r)
    x = gen_process(proc.spec, proc.n, path_seed)
    out: dict[tuple[str, str], float] = {}
    try:
        spec, scales, delta = resampled_deltas(x, cfg.resample_config(), seed=res_seed)
    except EstimationError:
        scales = np.array([], dtype=int)
    for method in cfg.methods:
        if scales.size:
            try:
                alphas = scale_alphas(spec, method, scales)
            except EstimationError:
                continue
            med = np.median(thetas_from_deltas(alphas.alpha, delta), axis=1)
            for j, v in zip(scales, med):
                out[(method, f"j={int(j)}")] = float(v)
    for q in cfg.quantiles:
        u = float(np.quantile(x, q))
        key = f"q={q:g}"
        try:
            out[("fs", key)] = ferro_segers(x, u)
        except EstimationError:
            pass
        for rr in cfg.runs_r:
            try:
                out[(f"runs-{rr}", key)] = runs_estimator(x, u, rr)
            except EstimationError:
                pass
    return out


def _autoselect_replicate(cfg: StudyConfig, p: int, r: int) -> dict[tuple[str, str], float]:
    proc = cfg.processes[p]
    path_seed, res_seed = _seeds(cfg, p, r)
    x = gen_process(proc.spec, proc.n, path_seed)
    rc = replace(cfg.resample_config(), seed=0)
    out: dict[tuple[str, str], float] = {}
    method = cfg.methods[0]
    try:
        s = _samples_with_seed(x, rc, method, res_seed)
    except EstimationError:
        return out
    for j, v in zip(s.scales, s.medians()):
        out[(method, f"j={int(j)}")] = float(v)
    sel = auto_select(s, threshold=cfg.kw_threshold)
    out[("auto", "auto")] = sel.estimate
    return out


def _coverage_replicate(cfg: StudyConfig, p: int, r: int) -> dict[tuple[str, str], float]:
    proc = cfg.processes[p]
    path_seed, res_seed = _seeds(cfg, p, r)
    x = gen_process(proc.spec, proc.n, path_seed)
    theta = proc.theta
    rc = replace(cfg.resample_config(), seed=0)
    out: dict[tuple[str, str], float] = {}
    try:
        s = _samples_with_seed(x, rc, cfg.methods[0], res_seed)
    except EstimationError:
        return out
    for j in cfg.coverage_scales:
        if j not in s.scales:
            continue
        sample = s.at(j)
        center = float(np.median(sample))
        nj = int(s.n_j[s.index(j)])
        for q in cfg.levels:
            out[("normal", f"j={j},q={q:g}")] = float(ci_normal(center, nj, q).covers(theta))
            out[("quantile", f"j={j},q={q:g}")] = float(ci_quantile(sample, q).covers(theta))
    return out


def _samples_with_seed(x, rc: ResampleConfig, method: str, seed: np.random.SeedSequence) -> ThetaSamples:
    spec = max_spectrum(x)
    alphas = scale_alphas(spec, method, candidate_scales(spec, rc.k))
    spec, used, delta = resampled_deltas(x, rc, alphas.scales, seed=seed)
    return ThetaSamples(used, thetas_from_deltas(alphas.alpha, delta), alphas.alpha, spec.n_j[used - 1], method, spec.n, delta)


_REPLICATE = {"rmse": _rmse_replicate, "autoselect": _autoselect_replicate, "coverage": _coverage_replicate}


def _run_task(task) -> dict:
    cfg, p, r = task
    return _REPLICATE[cfg.study](cfg, p, r)


def run_replicates(cfg: StudyConfig) -> list[list[dict]]:
    """Per-process lists of per-replicate result dicts, in replicate order."""
    tasks = [(cfg, p, r) for p in range(len(cfg.processes)) for r in range(cfg.reps)]
    if cfg.jobs <= 1:
        flat = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            flat = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))
    return [flat[p * cfg.reps : (p + 1) * cfg.reps] for p in range(len(cfg.processes))]


# --------------------------------------------------------------------------- aggregation

@dataclass(frozen=True)
class ResultRow:
    process: str
    theta: float
    alpha: float
    estimator: str
    tuning: str
    n_reps: int
    rmse: float
    bias: float
    median: float
    sd: float
    best: bool = False

    FIELDS = ("process", "theta", "alpha", "estimator", "tuning", "n_reps", "rmse", "bias", "median", "sd", "best")


@dataclass(frozen=True)
class CoverageRow:
    process: str
    theta: float
    alpha: float
    kind: str
    level: float
    scale: int
    n_reps: int
    coverage: float

    FIELDS = ("process", "theta", "alpha", "kind", "level", "scale", "n_reps", "coverage")


def summarize(values: Sequence[float], theta: float) -> tuple[float, float, float, float]:
    """(rmse, bias, median, population sd) of estimates against the true value."""
    v = np.asarray(values, dtype=float)
    err = v - theta
    rmse = math.sqrt(float(np.mean(err * err)))
    return rmse, float(np.mean(err)), float(np.median(v)), float(np.std(v))


def _collect(reps: list[dict]) -> dict[tuple[str, str], list[float]]:
    keys: list[tuple[str, str]] = []
    seen = set()
    for d in reps:
        for k in d:
            if k not in seen:
                seen.add(k)
                keys.append(k)
    return {k: [d[k] for d in reps if k in d] for k in keys}


def _tuning_order(tuning: str) -> tuple:
    name, _, val = tuning.partition("=")
    try:
        return (name, float(val))
    except ValueError:
        return (name, 0.0)


def aggregate_estimates(cfg: StudyConfig, results: list[list[dict]]) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for proc, reps in zip(cfg.processes, results):
        theta = proc.theta
        grouped = _collect(reps)
        est_order = {e: i for i, e in enumerate(dict.fromkeys(e for e, _ in grouped))}
        by_est: dict[str, list[ResultRow]] = {}
        for (est, tuning), vals in sorted(grouped.items(), key=lambda kv: (est_order[kv[0][0]], _tuning_order(kv[0][1]))):
            rmse, bias, med, sd = summarize(vals, theta)
            by_est.setdefault(est, []).append(ResultRow(proc.label, theta, proc.alpha, est, tuning, len(vals), rmse, bias, med, sd))
        for est, est_rows in by_est.items():
            full = [row for row in est_rows if row.n_reps == cfg.reps] or est_rows
            best = min(full, key=lambda row: row.rmse)
            rows.extend(replace(row, best=row is best) for row in est_rows)
    return rows


def aggregate_coverage(cfg: StudyConfig, results: list[list[dict]]) -> list[CoverageRow]:
    rows = []
    for proc, reps in zip(cfg.processes, results):
        grouped = _collect(reps)
        for kind in CI_KINDS:
            for q in cfg.levels:
                for j in cfg.coverage_scales:
                    vals = grouped.get((kind, f"j={j},q={q:g}"))
                    if not vals:
                        continue
                    rows.append(CoverageRow(proc.label, proc.theta, proc.alpha, kind, q, j, len(vals), 100.0 * float(np.mean(vals))))
    return rows


def run_rmse_study(cfg: StudyConfig) -> list[ResultRow]:
    return aggregate_estimates(cfg, run_replicates(replace(cfg, study="rmse")))


def run_autoselect_study(cfg: StudyConfig) -> list[ResultRow]:
    return aggregate_estimates(cfg, run_replicates(replace(cfg, study="autoselect")))


def run_coverage_study(cfg: StudyConfig, ci_kind: str | None = None) -> list[CoverageRow]:
    """Coverage (percent) per process, CI kind, level and scale; ``ci_kind`` filters the rows."""
    if ci_kind is not None and ci_kind not in CI_KINDS:
        raise ConfigError(f"unknown CI kind {ci_kind!r}; expected one of {CI_KINDS}")
    rows = aggregate_coverage(cfg, run_replicates(replace(cfg, study="coverage")))
    return rows if ci_kind is None else [r for r in rows if r.kind == ci_kind]


def run_study(cfg: StudyConfig):
    if cfg.study == "rmse":
        return run_rmse_study(cfg)
    if cfg.study == "autoselect":
        return run_autoselect_study(cfg)
    return run_coverage_study(cfg)


# --------------------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_csv(rows: Sequence, fh: TextIO | None = None) -> str:
    """Full per-tuning grid, one CSV row per result row."""
    buf = fh if fh is not None else io.StringIO()
    if rows:
        fields = type(rows[0]).FIELDS
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(getattr(row, f)) for f in fields])
    return buf.getvalue() if fh is None else ""


def _proc_key(row) -> tuple:
    # labels repeat across a grid (every armax row is "AM"); theta and alpha tell them apart
    return (row.process, row.theta, row.alpha)


def best_table(rows: Sequence[ResultRow]) -> list[dict]:
    """One record per process with the best-over-tuning RMSE of each estimator."""
    table: dict[tuple, dict] = {}
    for row in rows:
        if not row.best:
            continue
        rec = table.setdefault(_proc_key(row), {"process": row.process, "theta": row.theta, "alpha": row.alpha})
        rec[row.estimator] = row.rmse
        rec[f"{row.estimator}_tuning"] = row.tuning
    return list(table.values())


def autoselect_table(rows: Sequence[ResultRow]) -> list[dict]:
    """Best fixed scale vs automatic selection: RMSE, median and SD side by side."""
    table: dict[tuple, dict] = {}
    for row in rows:
        rec = table.setdefault(_proc_key(row), {"process": row.process, "theta": row.theta, "alpha": row.alpha})
        if row.estimator == "auto":
            rec.update(auto_rmse=row.rmse, auto_median=row.median, auto_sd=row.sd)
        elif row.best:
            rec.update(best_scale=row.tuning, best_rmse=row.rmse, best_median=row.median, best_sd=row.sd)
    return list(table.values())


def coverage_table(rows: Sequence[CoverageRow]) -> list[dict]:
    """Wide layout: one record per (process, kind) with a column per (level, scale)."""
    table: dict[tuple, dict] = {}
    for row in rows:
        rec = table.setdefault((*_proc_key(row), row.kind), {"process": row.process, "theta": row.theta, "alpha": row.alpha, "kind": row.kind})
        rec[f"{round(row.level * 100):d}%_j{row.scale}"] = row.coverage
    return list(table.values())


def records_csv(records: Sequence[dict], fh: TextIO | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    fields: list[str] = []
    for rec in records:
        fields.extend(k for k in rec if k not in fields)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for rec in records:
        w.writerow([_fmt(rec[k]) if k in rec else "" for k in fields])
    return buf.getvalue() if fh is None else ""


# --------------------------------------------------------------------------- table presets

ARMAX_THETAS = (0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90)
LINEAR_ALPHAS = (0.10, 0.50, 1.00, 1.50, 2.00, 2.50, 3.00)
MOVING_MAX_ALPHAS = (0.10, 0.50, 1.00, 1.50, 2.00, 2.50, 3.00)


def table_processes(name: str) -> tuple[StudyProcess, ...]:
    """Process grids of the simulation tables: 'armax', 'linear', 'moving-max', 'autoselect', 'coverage'."""
    if name == "armax":
        return tuple(StudyProcess("AM", table_armax(t), 2**13) for t in ARMAX_THETAS)
    if name == "linear":
        return tuple(StudyProcess("LP", table_linear(a), 2**14) for a in LINEAR_ALPHAS)
    if name == "moving-max":
        return tuple(StudyProcess("MM", table_moving_max(a), 2**13) for a in MOVING_MAX_ALPHAS)
    if name in ("autoselect", "coverage"):
        return (
            *(StudyProcess("AM", table_armax(t), 2**13) for t in (0.2, 0.5, 0.8)),
            *(StudyProcess("LP", table_linear(a), 2**14) for a in (0.5, 1.5, 2.5)),
            *(StudyProcess("MM", table_moving_max(a), 2**13) for a in (0.5, 1.5, 2.5)),
        )
    raise ConfigError(f"unknown table {name!r}")
