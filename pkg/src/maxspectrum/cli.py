"""Command-line interface: ``maxspectrum <subcommand> ...``.

Every report starts with a header recording the package version and the fully
resolved configuration (defaults and seed included), so rerunning with the
echoed values reproduces the output byte for byte. Worker counts and output
destinations are left out of the header because they do not affect results.

Exit codes: 0 success (row-level markers included), 2 configuration error,
3 data error, 4 estimation error. Failures also write a one-line JSON error
record to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bench import (
    STUDIES,
    autoselect_table,
    best_table,
    config_from_dict,
    coverage_table,
    read_config_dict,
    records_csv,
    rows_csv,
    run_study,
    table_processes,
)
from .competitors import DEFAULT_QUANTILES, threshold_sweep
from .core import TAILS, TRANSFORMS, ConfigError, DataError, EstimationError, load_csv, prepare_series, write_csv
from .intervals import ci_normal, ci_quantile
from .maxspec import max_spectrum, scale_alphas
from .resample import SCHEMES, ResampleConfig, candidate_scales, point_estimate, theta_samples
from .scaleselect import ScaleRange, auto_select, heatmap_export
from .simulate import Armax, Innovation, Linear, MovingMax, gen_process, spec_from_dict, spec_to_dict

FORMATS = ("csv", "json-lines")
EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION = 2, 3, 4


# --------------------------------------------------------------------------- report rendering

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    if v is None:
        return ""
    return v


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


@dataclass
class Report:
    """Named tables of row dicts plus the reproducibility header."""

    command: str
    config: dict
    sections: list[tuple[str, list[dict]]] = field(default_factory=list)

    def add(self, name: str, rows: list[dict]) -> None:
        self.sections.append((name, rows))

    def render(self, fmt: str = "csv") -> str:
        buf = io.StringIO()
        if fmt == "json-lines":
            head = {"record": "header", "version": __version__, "command": self.command, "config": self.config}
            buf.write(json.dumps(head, sort_keys=True) + "\n")
            for name, rows in self.sections:
                for row in rows:
                    rec = {"section": name, **{k: _json_value(v) for k, v in row.items()}}
                    buf.write(json.dumps(rec) + "\n")
            return buf.getvalue()
        buf.write(f"# maxspectrum {__version__}\n")
        buf.write(f"# command: {self.command}\n")
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        for name, rows in self.sections:
            buf.write(f"# section: {name}\n")
            fields: list[str] = []
            for row in rows:
                fields.extend(k for k in row if k not in fields)
            w.writerow(fields)
            for row in rows:
                w.writerow([_cell(row.get(k)) for k in fields])
        return buf.getvalue()


def _emit(report: Report, args) -> None:
    text = report.render(args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- shared helpers

def _resolved(args, drop: Sequence[str] = ()) -> dict:
    skip = {"func", "jobs", "output", "heatmap", "output_dir", "format", *drop}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _series(args) -> np.ndarray:
    column = args.column
    x = load_csv(args.input, int(column) if column.lstrip("-").isdigit() else column)
    return prepare_series(x, args.transform, args.tail, args.tail_mode)


def _resample_config(args) -> ResampleConfig:
    return ResampleConfig(args.scheme, args.k, args.n_in, args.n_out, args.seed, args.reducer)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _samples(args, x):
    spec = max_spectrum(x)
    if int(spec.valid.sum()) < 3:
        raise EstimationError(f"only {int(spec.valid.sum())} valid scales; at least 3 are needed")
    return spec, theta_samples(x, _resample_config(args), args.method, jobs=args.jobs)


def _alpha_rows(spec, samples) -> list[dict]:
    return [
        {"scale": int(j), "n_j": int(nj), "Y_j": spec.y(int(j)), "alpha": float(a)}
        for j, nj, a in zip(samples.scales, samples.n_j, samples.alpha)
    ]


def _boxplot_rows(samples) -> list[dict]:
    keys = ("scale", "q05", "q25", "median", "q75", "q95")
    return [dict(zip(keys, row)) for row in samples.summary_rows()]


def _heatmap_rows(m, threshold: float) -> list[dict]:
    rows = []
    for a, j1 in enumerate(m.scales[:-1]):
        for b in range(a + 1, m.scales.size):
            p = float(m.p[a, b])
            rows.append({"j1": int(j1), "j2": int(m.scales[b]), "p_value": p, "passes": p >= threshold})
    return rows


def _warn(msg: str) -> None:
    sys.stderr.write(f"warning: {msg}\n")


# --------------------------------------------------------------------------- subcommands

def cmd_estimate(args) -> Report:
    x = _series(args)
    spec, samples = _samples(args, x)
    window = None if args.window is None else ScaleRange.parse(args.window)
    heat = None
    if args.scales == "auto":
        sel = auto_select(samples, window, args.kw_threshold)
        rng, found, est, heat = sel.range, sel.found, sel.estimate, sel.matrix
        if not found:
            _warn(
                f"no scale range passed the Kruskal-Wallis screen at {args.kw_threshold}; "
                f"falling back to scale {rng}. Inspect the boxplot summary before relying on it."
            )
    else:
        rng = ScaleRange.parse(args.scales)
        found, est = True, point_estimate(samples, rng.lo, rng.hi)

    pooled = samples.pooled(rng.lo, rng.hi)
    intervals = [ci_quantile(pooled, args.level, (rng.lo, rng.hi))]
    hi_nj = int(samples.n_j[samples.index(rng.hi)])
    # the range interval uses the block count of the coarsest scale, the widest choice
    intervals.append(replace(ci_normal(est, hi_nj, args.level), scales=(rng.lo, rng.hi)))
    medians = samples.medians()
    for j in range(rng.lo, rng.hi + 1):
        s = samples.index(j)
        intervals.append(ci_normal(float(medians[s]), int(samples.n_j[s]), args.level, j))

    report = Report("estimate", _resolved(args))
    report.add("alpha", _alpha_rows(spec, samples))
    report.add("boxplot", _boxplot_rows(samples))
    report.add("selection", [{
        "j_lo": rng.lo, "j_hi": rng.hi, "mode": "auto" if args.scales == "auto" else "fixed",
        "found": found, "estimate": est, "n_pooled": int(pooled.size),
    }])
    report.add("intervals", [ci.as_dict() for ci in intervals])
    if heat is not None:
        report.add("heatmap", _heatmap_rows(heat, args.kw_threshold))
        if args.heatmap:
            heatmap_export(heat, args.heatmap, args.kw_threshold)
    return report


def cmd_spectrum(args) -> Report:
    x = _series(args)
    spec = max_spectrum(x)
    alphas = {}
    scales = candidate_scales(spec)
    if scales:
        est = scale_alphas(spec, args.method, scales)
        alphas = dict(zip(est.scales.tolist(), est.alpha.tolist()))
    rows = [
        {"j": int(j), "n_j": int(nj), "Y_j": float(y), "valid": bool(v), "alpha": alphas.get(int(j))}
        for j, nj, y, v in zip(spec.j, spec.n_j, spec.Y, spec.valid)
    ]
    report = Report("spectrum", _resolved(args))
    report.add("spectrum", rows)
    return report


def cmd_scales(args) -> Report:
    x = _series(args)
    spec, samples = _samples(args, x)
    window = None if args.window is None else ScaleRange.parse(args.window)
    sel = auto_select(samples, window, args.kw_threshold)
    if not sel.found:
        _warn("no scale range passed the Kruskal-Wallis screen; inspect the boxplot summary")
    report = Report("scales", _resolved(args))
    report.add("alpha", _alpha_rows(spec, samples))
    report.add("boxplot", _boxplot_rows(samples))
    report.add("heatmap", _heatmap_rows(sel.matrix, args.kw_threshold))
    report.add("selection", [{**sel.as_dict(), "threshold": args.kw_threshold}])
    if args.long:
        report.add("samples", [
            {"scale": int(j), "iteration": it, "theta": float(v)}
            for s, j in enumerate(samples.scales)
            for it, v in enumerate(samples.theta[s])
        ])
    if args.heatmap:
        heatmap_export(sel.matrix, args.heatmap, args.kw_threshold)
    return report


def cmd_competitors(args) -> Report:
    x = _series(args)
    thresholds = None if args.thresholds is None else _float_list(args.thresholds)
    quantiles = DEFAULT_QUANTILES if args.quantiles is None else _float_list(args.quantiles)
    run_lengths = [1] if args.estimator == "ferro-segers" else [int(v) for v in _float_list(args.r)]
    rows = []
    for r in run_lengths:
        rows.extend(threshold_sweep(x, quantiles, args.estimator, r, thresholds))
    resolved = _resolved(args)
    resolved["quantiles"] = None if thresholds is not None else list(quantiles)
    report = Report("competitors", resolved)
    report.add("sweep", [
        {
            "quantile": row.quantile, "threshold": row.threshold, "estimator": row.estimator,
            "parameter": "-" if row.r is None else row.r, "estimate": row.estimate, "error": row.error,
        }
        for row in rows
    ])
    return report


def _process_spec(args):
    if args.spec:
        try:
            return spec_from_dict(json.loads(args.spec))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--spec is not valid JSON: {exc}") from None
    if args.process == "armax":
        return Armax(args.b, args.alpha)
    if args.process == "linear":
        return Linear(tuple(_float_list(args.psi)), Innovation(args.innovation or "student_t", args.alpha))
    return MovingMax(tuple(_float_list(args.a)), Innovation(args.innovation or "pareto", args.alpha))


def cmd_simulate(args) -> None:
    spec = _process_spec(args)
    x = gen_process(spec, args.n, args.seed)
    meta = {"process": spec_to_dict(spec), "n": args.n, "seed": args.seed}
    comments = [f"maxspectrum {__version__}", "command: simulate", f"config: {json.dumps(meta, sort_keys=True)}"]
    if args.output:
        write_csv(args.output, x, comments=comments)
    else:
        sys.stdout.write("".join(f"# {c}\n" for c in comments) + "value\n")
        sys.stdout.write("".join(repr(float(v)) + "\n" for v in x))


def _bench_config(args):
    if args.config:
        d = read_config_dict(args.config)
    else:
        d = {"study": args.study or "rmse", "processes": [p.as_dict() for p in table_processes(args.table)]}
    for key, val in (("preset", args.preset), ("study", args.study), ("reps", args.reps), ("seed", args.seed),
                     ("n_in", args.n_in), ("n_out", args.n_out)):
        if val is not None:
            d[key] = val
    d["jobs"] = args.jobs
    return config_from_dict(d)


def cmd_bench(args) -> Report:
    cfg = _bench_config(args)
    rows = run_study(cfg)
    if cfg.study == "rmse":
        table = best_table(rows)
    elif cfg.study == "autoselect":
        table = autoselect_table(rows)
    else:
        table = coverage_table(rows)
    resolved = cfg.as_dict()
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        head = f"# maxspectrum {__version__}\n# command: bench\n# config: {json.dumps(resolved, sort_keys=True)}\n"
        (out / f"{cfg.study}_table.csv").write_text(head + records_csv(table), encoding="utf-8")
        (out / f"{cfg.study}_grid.csv").write_text(head + rows_csv(rows), encoding="utf-8")
    report = Report("bench", resolved)
    report.add("table", table)
    keys = type(rows[0]).FIELDS if rows else ()
    report.add("grid", [{k: getattr(r, k) for k in keys} for r in rows])
    return report


# --------------------------------------------------------------------------- parser

def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=FORMATS, default="csv", help="report format")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file holding the series")
    p.add_argument("--column", default="0", help="column name or zero-based index")
    p.add_argument("--transform", choices=TRANSFORMS, default="none")
    p.add_argument("--tail", choices=TAILS, default=None, help="keep one tail (positive part after orientation)")
    p.add_argument("--tail-mode", choices=("clamp", "delete"), default="clamp",
                   help="clamp non-tail values to zero or delete them")


def _add_resampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("wls", "gls"), default="wls", help="regression for alpha(j)")
    p.add_argument("--n-in", type=int, default=1, help="resamples averaged per outer iteration")
    p.add_argument("--n-out", type=int, default=200, help="outer iterations (theta samples per scale)")
    p.add_argument("--scheme", choices=SCHEMES, default="permutation")
    p.add_argument("--k", type=int, default=None, help="resample length for the bootstrap (default n)")
    p.add_argument("--reducer", choices=("mean", "median"), default="mean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--window", default=None, help="screening window j1:j2 (default 3..floor(log2 n)-2)")
    p.add_argument("--kw-threshold", type=float, default=0.05, help="Kruskal-Wallis pass level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxspectrum", description="Extremal index estimation via the max-spectrum.")
    parser.add_argument("--version", action="version", version=f"maxspectrum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="full estimate with scale selection and intervals")
    _add_input(p)
    _add_resampling(p)
    p.add_argument("--scales", default="auto", help="'auto' or a fixed range j1:j2")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--heatmap", default=None, help="also write the p-value matrix to this CSV file")
    _add_output(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("spectrum", help="max-spectrum Y_j and alpha(j)")
    _add_input(p)
    p.add_argument("--method", choices=("wls", "gls"), default="wls")
    _add_output(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("scales", help="per-scale boxplot data and the Kruskal-Wallis heat-map")
    _add_input(p)
    _add_resampling(p)
    p.add_argument("--long", action="store_true", help="include every resampled theta in the report")
    p.add_argument("--heatmap", default=None, help="also write the p-value matrix to this CSV file")
    _add_output(p)
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("competitors", help="runs or Ferro-Segers estimates over a threshold grid")
    _add_input(p)
    p.add_argument("--estimator", choices=("ferro-segers", "runs"), default="ferro-segers")
    p.add_argument("--quantiles", default=None, help="comma-separated threshold quantiles (default 0.900..0.995)")
    p.add_argument("--thresholds", default=None, help="comma-separated raw thresholds (overrides --quantiles)")
    p.add_argument("--r", default="1", help="run length(s) for the runs estimator, comma-separated")
    _add_output(p)
    p.set_defaults(func=cmd_competitors)

    p = sub.add_parser("simulate", help="sample path of a process with known theta")
    p.add_argument("--process", choices=("armax", "linear", "moving-max"), default="armax")
    p.add_argument("--b", type=float, default=0.5, help="armax coefficient")
    p.add_argument("--alpha", type=float, default=1.0, help="tail index / degrees of freedom")
    p.add_argument("--psi", default="0.5,0.2,0.1", help="linear coefficients")
    p.add_argument("--a", default="0.8,0.2,0.4", help="moving-max coefficients")
    p.add_argument("--innovation", choices=("frechet", "pareto", "student_t"), default=None)
    p.add_argument("--spec", default=None, help="process as a JSON object (overrides the flags above)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="Monte Carlo study from a JSON config or a built-in table grid")
    p.add_argument("config", nargs="?", default=None, help="JSON study configuration")
    p.add_argument("--table", choices=("armax", "linear", "moving-max", "autoselect", "coverage"), default="armax",
                   help="built-in process grid used when no config file is given")
    p.add_argument("--study", choices=STUDIES, default=None)
    p.add_argument("--preset", choices=("desk", "full"), default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n-in", type=int, default=None)
    p.add_argument("--n-out", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir", default=None, help="also write <study>_table.csv and <study>_grid.csv here")
    _add_output(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(kind: str, code: int, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        return _fail("config", EXIT_CONFIG, ConfigError("--jobs must be >= 1"))
    try:
        result = args.func(args)
        if isinstance(result, Report):
            _emit(result, args)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except DataError as exc:
        return _fail("data", EXIT_DATA, exc)
    except EstimationError as exc:
        return _fail("estimation", EXIT_ESTIMATION, exc)
    except OSError as exc:
        return _fail("data", EXIT_DATA, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
