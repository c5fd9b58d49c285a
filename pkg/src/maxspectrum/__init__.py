"""Extremal index estimation for heavy-tailed time series via the max-spectrum of block maxima."""
from __future__ import annotations

__version__ = "0.1.0"

from .competitors import ferro_segers, ferro_segers_from_times, runs_estimator, threshold_sweep
from .core import ConfigError, DataError, EstimationError, load_csv, log_returns, prepare_series
from .intervals import ci_normal, ci_quantile
from .maxspec import MaxSpectrum, max_spectrum, scale_alphas, wls_weights
from .resample import ResampleConfig, ThetaSamples, point_estimate, theta_samples
from .scaleselect import auto_select, kruskal_wallis, pvalue_matrix, select_range
from .simulate import Armax, Innovation, Linear, MovingMax, gen_process, theoretical_theta

__all__ = [
    "__version__",
    "Armax", "ConfigError", "DataError", "EstimationError", "Innovation", "Linear", "MaxSpectrum",
    "MovingMax", "ResampleConfig", "ThetaSamples", "auto_select", "ci_normal", "ci_quantile",
    "ferro_segers", "ferro_segers_from_times", "gen_process", "kruskal_wallis", "load_csv",
    "log_returns", "max_spectrum", "point_estimate", "prepare_series", "pvalue_matrix",
    "runs_estimator", "scale_alphas", "select_range", "theoretical_theta", "theta_samples",
    "threshold_sweep", "wls_weights",
]
