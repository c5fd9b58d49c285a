from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from maxspectrum.competitors import (
    DEFAULT_QUANTILES,
    ferro_segers,
    ferro_segers_from_times,
    interexceedance_times,
    runs_estimator,
    sweep_csv,
    threshold_sweep,
)
from maxspectrum.core import ConfigError, EstimationError
from maxspectrum.simulate import gen_process, table_armax, sample_frechet


def runs_by_hand(x, u, r):
    n = len(x)
    num = sum(1 for j in range(n - r) if x[j] >= u and max(x[j + 1 : j + r + 1]) <= u)
    den = sum(1 for j in range(n - r) if x[j] > u)
    return num / den


def fs_by_hand(T):
    T = [float(t) for t in T]
    N = len(T) + 1
    if max(T) <= 2:
        est = 2 * sum(T) ** 2 / ((N - 1) * sum(t * t for t in T))
    else:
        est = 2 * sum(t - 1 for t in T) ** 2 / ((N - 1) * sum((t - 1) * (t - 2) for t in T))
    return min(1.0, est)


def test_runs_hand_examples():
    assert runs_estimator([5, 1, 1, 5, 1, 1], 4, 1) == 1.0
    assert runs_estimator([5, 5, 1, 1, 1, 1], 4, 1) == 0.5
    with pytest.raises(EstimationError, match="no exceedances"):
        runs_estimator([1, 2, 3], 10, 1)
    with pytest.raises(ConfigError):
        runs_estimator([1, 2, 3], 1, 0)
    with pytest.raises(ConfigError):
        runs_estimator([1, 2, 3], 1, 3)


def test_runs_numerator_uses_weak_inequality():
    # a value exactly at u starts a run in the numerator but is not an exceedance,
    # so ties on the threshold can push the ratio above one
    assert runs_estimator([4, 1, 5, 1], 4, 1) == 2.0
    assert runs_estimator([4.5, 1, 5, 1], 4, 1) == 1.0


@given(st.lists(st.integers(0, 9), min_size=3, max_size=40), st.integers(1, 4), st.integers(0, 8))
def test_runs_matches_enumeration(values, r, u):
    assume(r < len(values))
    x = [float(v) + 0.5 for v in values]  # no value sits exactly on the threshold
    assume(any(v > u for v in x[: len(x) - r]))
    est = runs_estimator(x, u, r)
    assert est == pytest.approx(runs_by_hand(x, u, r))
    assert 0 <= est <= 1


def test_ferro_segers_hand_examples():
    assert ferro_segers_from_times([2, 2]) == 1.0
    assert ferro_segers_from_times([1, 1, 10]) == pytest.approx(0.75)
    assert ferro_segers([9, 0, 9, 0, 9], 5) == 1.0
    with pytest.raises(EstimationError):
        ferro_segers([9, 0, 0], 5)
    with pytest.raises(EstimationError):
        ferro_segers_from_times([])


def test_interexceedance_times():
    assert interexceedance_times([0, 9, 9, 0, 0, 9], 5).tolist() == [1, 3]


@given(st.lists(st.integers(1, 30), min_size=1, max_size=30))
def test_ferro_segers_matches_formula(T):
    est = ferro_segers_from_times(T)
    assert est == pytest.approx(fs_by_hand(T))
    assert 0 < est <= 1


@given(st.lists(st.floats(0.01, 100), min_size=10, max_size=60), st.floats(0.5, 0.9))
def test_estimators_invariant_under_increasing_maps(values, p):
    x = np.asarray(values)
    u = float(np.quantile(x, p))
    assume(np.sum(x > u) >= 2)
    for f in (np.log, lambda v: v**3, np.sqrt):
        assert ferro_segers(f(x), float(f(u))) == pytest.approx(ferro_segers(x, u))
        assert runs_estimator(f(x), float(f(u)), 2) == pytest.approx(runs_estimator(x, u, 2))


def test_ferro_segers_directional_behaviour():
    isolated = np.zeros(2000)
    isolated[::50] = 10.0
    assert ferro_segers(isolated, 5.0) == 1.0
    clustered = np.zeros(2000)
    for start in range(0, 2000, 200):
        clustered[start : start + 10] = 10.0
    assert ferro_segers(clustered, 5.0) < 0.2


def test_default_grid():
    assert len(DEFAULT_QUANTILES) == 20
    assert DEFAULT_QUANTILES[0] == 0.9 and DEFAULT_QUANTILES[-1] == 0.995
    assert np.allclose(np.diff(DEFAULT_QUANTILES), 0.005)


def test_sweep_rows_and_markers():
    x = sample_frechet(1.0, np.random.default_rng(0), 1000)
    assert len(threshold_sweep(x, [0.95])) == 1
    rows = threshold_sweep(x, thresholds=[float(x.max()) + 1.0], estimator="runs", r=2)
    assert len(rows) == 1 and rows[0].error and np.isnan(rows[0].estimate)
    text = sweep_csv(rows)
    assert text.splitlines()[0] == "quantile,threshold,estimator,parameter,estimate,error"
    assert text.splitlines()[1].startswith("nan,") and ",runs,2,," in text
    assert ",-," in sweep_csv(threshold_sweep(x, [0.9]))
    with pytest.raises(ConfigError):
        threshold_sweep(x, [1.0])
    with pytest.raises(ConfigError):
        threshold_sweep(x, [0.9], estimator="hill")


def test_iid_sweep_concentrates_near_one():
    x = sample_frechet(1.0, np.random.default_rng(5), 2**13)
    rows = threshold_sweep(x, [0.90, 0.92, 0.94, 0.96, 0.98, 0.99])
    assert np.median([r.estimate for r in rows]) > 0.9


def test_armax_sweeps_near_truth():
    x = gen_process(table_armax(0.5), 2**13, seed=42)
    grid = [0.90, 0.92, 0.94, 0.96, 0.98, 0.99]
    runs = [r.estimate for r in threshold_sweep(x, grid, "runs", 1)]
    fs = [r.estimate for r in threshold_sweep(x, grid, "ferro-segers")]
    assert abs(np.median(runs) - 0.5) < 0.1
    assert abs(np.median(fs) - 0.5) < 0.1
