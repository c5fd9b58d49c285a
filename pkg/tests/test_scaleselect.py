from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from maxspectrum.core import ConfigError
from maxspectrum.resample import ThetaSamples
from maxspectrum.scaleselect import (
    PValueMatrix,
    ScaleRange,
    auto_select,
    default_window,
    heatmap_export,
    kruskal_wallis,
    kruskal_wallis_exact,
    pvalue_matrix,
    select_range,
)

values = st.lists(st.integers(-5, 5).map(float) | st.floats(-100, 100), min_size=1, max_size=12)


def make_samples(groups: dict[int, np.ndarray], n=2**13) -> ThetaSamples:
    scales = np.array(sorted(groups))
    theta = np.vstack([groups[j] for j in scales])
    return ThetaSamples(scales, theta, np.ones(scales.size), n >> scales, "wls", n)


def matrix_from_passing(scales, passing_pairs):
    scales = np.asarray(scales)
    p = np.full((scales.size, scales.size), np.nan)
    for a in range(scales.size):
        for b in range(a + 1, scales.size):
            p[a, b] = 0.5 if (int(scales[a]), int(scales[b])) in passing_pairs else 0.001
    return PValueMatrix(scales, p)


def test_kruskal_wallis_hand_oracle():
    h, p = kruskal_wallis([[1, 2, 3], [4, 5, 6]])
    assert h == pytest.approx(3.857142857, abs=1e-9)
    assert p == pytest.approx(0.0495, abs=1e-4)


def test_kruskal_wallis_balanced_pools():
    for groups in ([[1, 3], [2, 2]], [[1, 4], [2, 3]]):
        h, p = kruskal_wallis(groups)
        assert h < 0.5 and p > 0.5


def test_kruskal_wallis_all_tied():
    assert kruskal_wallis([[2.0, 2.0], [2.0]]) == (0.0, 1.0)
    assert kruskal_wallis_exact([[2.0, 2.0], [2.0]]) == (0.0, 1.0)


def test_kruskal_wallis_preconditions():
    with pytest.raises(ConfigError):
        kruskal_wallis([[1.0, 2.0, 3.0]])
    with pytest.raises(ConfigError):
        kruskal_wallis([[1.0], []])
    with pytest.raises(ConfigError):
        kruskal_wallis([[1.0], [2.0]])


@given(st.lists(values, min_size=2, max_size=4))
def test_kruskal_wallis_matches_scipy(groups):
    pooled = [v for g in groups for v in g]
    assume(len(pooled) >= 3 and len(set(pooled)) > 1)
    h, p = kruskal_wallis(groups)
    ref = stats.kruskal(*groups)
    assert h >= 0
    assert h == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)


@given(st.lists(values, min_size=2, max_size=3), st.sampled_from([np.exp, np.arctan, lambda v: v**3 + 7]))
def test_kruskal_wallis_rank_invariance(groups, f):
    pooled = [v for g in groups for v in g]
    assume(len(pooled) >= 3 and len(set(pooled)) > 1)
    moved = [[float(f(v)) for v in g] for g in groups]
    assume(len({float(f(v)) for v in pooled}) == len(set(pooled)))  # f stays strictly increasing in float
    assert kruskal_wallis(moved) == pytest.approx(kruskal_wallis(groups), rel=1e-9, abs=1e-12)


def test_exact_p_value_by_enumeration():
    # {1,2,3} vs {4,5,6}: only the two extreme splits reach H_obs out of C(6,3) = 20
    h, p = kruskal_wallis_exact([[1, 2, 3], [4, 5, 6]])
    assert h == pytest.approx(3.857142857, abs=1e-9)
    assert p == pytest.approx(2 / 20)
    with pytest.raises(ConfigError):
        kruskal_wallis_exact([list(range(6)), list(range(6, 12))])


def test_label_permutation_keeps_statistic_distribution():
    rng = np.random.default_rng(3)
    hs_a, hs_b = [], []
    for _ in range(2000):
        g = rng.standard_normal((3, 10))
        hs_a.append(kruskal_wallis(list(g))[0])
        hs_b.append(kruskal_wallis(list(g[::-1]))[0])
    assert np.allclose(hs_a, hs_b)
    # under the null H is approximately chi-square with 2 degrees of freedom
    assert np.mean(hs_a) == pytest.approx(2.0, rel=0.1)


def test_scale_range_parse_and_format():
    r = ScaleRange.parse("5:7")
    assert (r.lo, r.hi, len(r), str(r)) == (5, 7, 3, "5:7")
    assert ScaleRange.parse("4") == ScaleRange(4, 4)
    with pytest.raises(ConfigError):
        ScaleRange.parse("a:b")
    with pytest.raises(ConfigError):
        ScaleRange(7, 5)


def test_constant_scales_all_pass():
    s = make_samples({j: np.full(50, 0.5) for j in range(3, 8)})
    m = pvalue_matrix(s, ScaleRange(3, 7))
    upper = m.p[np.triu_indices(5, 1)]
    assert np.all(upper == 1.0)
    assert select_range(m) == (ScaleRange(3, 7), True)


def test_shifted_edges_are_detected():
    rng = np.random.default_rng(8)
    groups = {j: rng.normal(0.5, 0.02, 200) for j in (5, 6, 7)}
    groups[4] = rng.normal(0.6, 0.02, 200)
    groups[8] = rng.normal(0.4, 0.02, 200)
    m = pvalue_matrix(make_samples(groups), ScaleRange(4, 8))
    assert m(5, 7) > 0.05
    for j1 in range(4, 8):
        for j2 in range(j1 + 1, 9):
            if j1 == 4 or j2 == 8:
                assert m(j1, j2) < m(5, 7) and m(j1, j2) < 0.05
    assert select_range(m)[0] == ScaleRange(5, 7)


def test_two_scale_window_has_one_entry(tmp_path):
    s = make_samples({3: np.linspace(0, 1, 20), 4: np.linspace(0.1, 1.1, 20)})
    m = pvalue_matrix(s, ScaleRange(3, 4))
    assert np.count_nonzero(~np.isnan(m.p)) == 1
    text = m.to_csv()
    assert text.splitlines()[0] == "j1,j2=4"
    assert len(text.splitlines()) == 2
    with pytest.raises(ConfigError):
        pvalue_matrix(s, ScaleRange(3, 3))
    with pytest.raises(ConfigError):
        m(4, 3)


def test_select_range_unique_longest():
    m = matrix_from_passing(range(3, 10), {(5, 7), (5, 6), (6, 7), (8, 9)})
    assert select_range(m) == (ScaleRange(5, 7), True)


def test_select_range_tie_goes_to_lowest_start():
    m = matrix_from_passing(range(3, 10), {(3, 4), (5, 6)})
    assert select_range(m) == (ScaleRange(3, 4), True)


def test_select_range_falls_back_to_lower_middle():
    assert select_range(matrix_from_passing(range(2, 10), set())) == (ScaleRange(5, 5), False)
    assert select_range(matrix_from_passing(range(3, 10), set())) == (ScaleRange(6, 6), False)


@given(st.sets(st.tuples(st.integers(1, 8), st.integers(1, 8)).filter(lambda t: t[0] < t[1])),
       st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_raising_threshold_never_lengthens(pairs, t1, t2):
    lo_t, hi_t = sorted((t1, t2))
    rng = np.random.default_rng(len(pairs))
    scales = np.arange(1, 9)
    p = np.full((8, 8), np.nan)
    for a in range(8):
        for b in range(a + 1, 8):
            p[a, b] = rng.uniform(0, 0.6) if (a + 1, b + 1) in pairs else rng.uniform(0, 0.01)
    m = PValueMatrix(scales, p)
    r_lo, found_lo = select_range(m, lo_t)
    r_hi, found_hi = select_range(m, hi_t)
    assert len(r_hi) <= len(r_lo) or not found_lo
    # depends on the thresholded matrix only
    same = PValueMatrix(scales, np.where(m.passing(lo_t) == 1, 1.0, 0.0) + np.where(np.isnan(p), np.nan, 0))
    assert select_range(same, 0.5) == (r_lo, found_lo)


def test_passing_companion_and_export(tmp_path):
    m = matrix_from_passing(range(3, 6), {(3, 5)})
    mark = m.passing(0.05)
    assert mark[0, 2] == 1 and mark[0, 1] == 0 and mark[1, 2] == 0
    main, comp = heatmap_export(m, tmp_path / "heat.csv", 0.05)
    assert comp.name == "heat_pass.csv"
    assert comp.read_text().splitlines() == ["j1,j2=4,j2=5", "3,0,1", "4,,0"]
    assert main.read_text().splitlines()[1] == "3,0.001,0.5"


def test_default_window():
    assert default_window(2**13, range(1, 12)) == ScaleRange(3, 11)
    assert default_window(2**13, range(5, 9)) == ScaleRange(5, 8)
    assert default_window(64, [1, 2]) == ScaleRange(1, 2)


def test_auto_select_pools_the_selected_range():
    rng = np.random.default_rng(1)
    groups = {j: rng.normal(0.5, 0.02, 200) for j in range(3, 12)}
    for j in (3, 4, 10, 11):
        groups[j] = groups[j] + 0.2
    s = make_samples(groups)
    sel = auto_select(s)
    assert (sel.range, sel.found) == (ScaleRange(5, 9), True)
    assert sel.estimate == pytest.approx(np.median(s.pooled(5, 9)))
    d = sel.as_dict()
    assert d["j_lo"] == 5 and d["j_hi"] == 9 and d["method"] == "wls"
