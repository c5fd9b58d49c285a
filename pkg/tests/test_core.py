from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxspectrum.core import (
    ConfigError,
    DataError,
    as_series,
    extract_tail,
    load_csv,
    log_returns,
    prepare_series,
    write_csv,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def test_as_series_rejects_bad_input():
    with pytest.raises(DataError, match="1-D"):
        as_series([[1.0, 2.0]])
    with pytest.raises(DataError, match="at least 3"):
        as_series([1.0, 2.0], min_length=3)
    with pytest.raises(DataError, match="position 1"):
        as_series([1.0, math.nan])


def test_load_csv_numeric_column_without_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1.5,9\n2.5,8\n")
    assert load_csv(p).tolist() == [1.5, 2.5]
    assert load_csv(p, 1).tolist() == [9.0, 8.0]


def test_load_csv_named_column_and_comments(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("# produced elsewhere\ndate,close\n2020-01-01,10\n2020-01-02,11\n")
    assert load_csv(p, "close").tolist() == [10.0, 11.0]
    assert load_csv(p, 1).tolist() == [10.0, 11.0]


def test_load_csv_error_names_the_line(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("value\n1\n2\nabc\n")
    with pytest.raises(DataError, match="row 4"):
        load_csv(p)
    p.write_text("value\n1\ninf\n")
    with pytest.raises(DataError, match="row 3.*non-finite"):
        load_csv(p)


def test_load_csv_missing_inputs(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "none.csv")
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match="not in header"):
        load_csv(p, "c")


@given(st.lists(finite, min_size=1, max_size=50))
def test_write_then_load_is_bit_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(p, values, comments=["source: test"])
    back = load_csv(p)
    assert np.array_equal(back, np.array(values), equal_nan=False)


def test_log_returns_example():
    r = log_returns([100.0, 110.0, 99.0])
    assert r == pytest.approx([math.log(1.1), math.log(0.9)], abs=1e-15)


def test_log_returns_rejects_non_positive_price():
    with pytest.raises(DataError, match="position 1"):
        log_returns([1.0, 0.0, 2.0])


def test_extract_tail_clamp_keeps_positions():
    x = [1.0, -2.0, 3.0, -0.5]
    assert extract_tail(x, "upper").tolist() == [1.0, 0.0, 3.0, 0.0]
    assert extract_tail(x, "lower").tolist() == [0.0, 2.0, 0.0, 0.5]


def test_extract_tail_delete_drops_positions():
    x = [1.0, -2.0, 3.0, 0.0]
    assert extract_tail(x, "upper", mode="delete").tolist() == [1.0, 3.0]
    with pytest.raises(ConfigError):
        extract_tail(x, "middle")
    with pytest.raises(ConfigError):
        extract_tail(x, "upper", mode="drop")


def test_prepare_series_applies_transform_before_tail():
    prices = [100.0, 110.0, 99.0, 99.0]
    y = prepare_series(prices, "neg-log-returns", "upper")
    assert y == pytest.approx([0.0, -math.log(0.9), 0.0])
    with pytest.raises(ConfigError):
        prepare_series(prices, "squared")


@given(st.lists(finite, min_size=1, max_size=40))
def test_clamped_tails_are_nonnegative_and_complementary(values):
    up = extract_tail(values, "upper")
    lo = extract_tail(values, "lower")
    assert up.size == lo.size == len(values)
    assert np.all(up >= 0) and np.all(lo >= 0)
    assert np.array_equal(up - lo, np.array(values, dtype=float))
