import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from logcascade.cascade_measure import build_measure, build_mrw
from logcascade.errors import InputDataError
from logcascade.estimators import CovarianceEstimate, ScalingFit
from logcascade.gaussian_field import CascadeParams, TimeGrid, sample_path
from logcascade.serialization import (
    covariance_from_dict,
    covariance_to_dict,
    fmt,
    read_columns,
    read_covariance_csv,
    read_covariance_json,
    to_jsonable,
    write_columns,
    write_covariance_csv,
    write_covariance_json,
    write_json,
    write_measure,
    write_mrw,
    write_omega,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


def _estimate(values, stderr=None, delta_t=64.0, n_sub=3):
    values = np.asarray(values, dtype=float)
    return CovarianceEstimate(np.arange(values.size, dtype=float), values,
                              None if stderr is None else np.asarray(stderr, float),
                              delta_t, n_sub)


@given(finite)
def test_float_format_is_lossless(x):
    assert float(fmt(x)) == x


def test_negative_zero_written_as_zero():
    assert fmt(-0.0) == "0"


@given(arrays(float, st.integers(0, 30), elements=finite),
       arrays(float, st.integers(0, 30), elements=finite))
def test_columns_round_trip(a, b):
    n = min(a.size, b.size)
    buf = io.StringIO()
    write_columns(buf, ("x", "y"), a[:n], b[:n])
    buf.seek(0)
    x, y = read_columns(buf, ("x", "y"))
    np.testing.assert_array_equal(x, a[:n] + 0.0)
    np.testing.assert_array_equal(y, b[:n] + 0.0)


def test_header_mismatch_and_bad_values():
    with pytest.raises(InputDataError):
        read_columns(io.StringIO("a,b\n1,2\n"), ("x", "y"))
    with pytest.raises(InputDataError):
        read_columns(io.StringIO("x,y\n1,zz\n"), ("x", "y"))


@given(arrays(float, st.integers(1, 20), elements=finite), st.booleans(),
       st.floats(1.0, 1e4), st.integers(1, 100))
def test_covariance_csv_round_trip(values, with_se, delta_t, n_sub):
    se = np.abs(values) if with_se else None
    c = _estimate(values, se, delta_t, n_sub)
    buf = io.StringIO()
    write_covariance_csv(c, buf)
    buf.seek(0)
    back = read_covariance_csv(buf, delta_t, n_sub)
    np.testing.assert_array_equal(back.values, values + 0.0)
    np.testing.assert_array_equal(back.lags, c.lags)
    if with_se:
        np.testing.assert_array_equal(back.stderr, se + 0.0)
    else:
        assert back.stderr is None


@given(arrays(float, st.integers(1, 20), elements=finite), st.booleans(),
       st.floats(1.0, 1e4), st.integers(1, 100))
def test_covariance_json_round_trip(values, with_se, delta_t, n_sub):
    se = np.abs(values) if with_se else None
    c = _estimate(values, se, delta_t, n_sub)
    buf = io.StringIO()
    write_covariance_json(c, buf, seed=5)
    buf.seek(0)
    back = read_covariance_json(buf)
    np.testing.assert_array_equal(back.values, values)
    assert back.delta_t == delta_t and back.n_subsamples == n_sub
    assert (back.stderr is None) == (not with_se)


def test_covariance_dict_layout():
    c = _estimate([0.02, 0.01, 0.005], [0.001, 0.001, 0.002])
    fit = ScalingFit(lambda2_hat=0.01, T_hat=14.2, lag_range=(1.0, 2.0), residual_rms=1e-4,
                     param_cov=np.eye(2), n_lags=3)
    d = covariance_to_dict(c, fit, seed=9)
    assert set(d) == {"lags", "values", "stderr", "fit", "meta"}
    assert d["fit"] == {"lambda2": 0.01, "T": 14.2, "residual_rms": 1e-4}
    assert d["meta"] == {"delta_t": 64.0, "n_subsamples": 3, "seed": 9}
    np.testing.assert_array_equal(covariance_from_dict(d).values, c.values)


def test_degenerate_fit_serializes_without_nan():
    c = _estimate([0.0, 0.0, 0.0])
    fit = ScalingFit(0.0, math.nan, (1.0, 2.0), 0.0, np.full((2, 2), math.nan), 3,
                     degenerate=True)
    buf = io.StringIO()
    write_covariance_json(c, buf, fit)
    assert json.loads(buf.getvalue())["fit"]["T"] is None


def test_malformed_dict():
    with pytest.raises(InputDataError):
        covariance_from_dict({"lags": [0.0]})


def test_jsonable_conversion(tmp_path):
    obj = {"a": np.float64(1.5), "b": np.arange(3), "c": [math.inf, math.nan], "d": np.bool_(True)}
    assert to_jsonable(obj) == {"a": 1.5, "b": [0, 1, 2], "c": [None, None], "d": True}
    write_json(obj, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text())["c"] == [None, None]


def test_path_writers_round_trip():
    g = TimeGrid(0.0, 0.5, 40)
    w = sample_path("nonstationary", g, CascadeParams(0.2, 0.5), seed=3)
    m = build_measure(w)
    x = build_mrw(m, seed=4)
    for writer, obj, header, expected_t, expected_v in [
        (write_omega, w, ("t", "omega"), g.times, w.values),
        (write_measure, m, ("t", "M"), m.times, m.cumulative),
        (write_mrw, x, ("t", "X"), x.times[1:], x.values[1:]),
    ]:
        buf = io.StringIO()
        writer(obj, buf)
        buf.seek(0)
        t, v = read_columns(buf, header)
        np.testing.assert_array_equal(t, expected_t)
        np.testing.assert_array_equal(v, expected_v)
