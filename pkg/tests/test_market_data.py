import datetime as dt
import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logcascade.errors import InputDataError, ParameterError
from logcascade.gaussian_field import CascadeParams
from logcascade.market_data import (
    OhlcRecord,
    SkippedRecordWarning,
    UnsortedInputWarning,
    daily_range,
    magnitude_series,
    parse_date,
    parse_ohlc,
    synthetic_ohlc,
    write_magnitude_series,
    write_ohlc,
)

HEADER = "date,open,high,low,close\n"


def _rec(day, o=100.0, h=101.0, lo=99.0, c=100.5):
    return OhlcRecord(dt.date(2020, 1, day), o, h, lo, c)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def test_single_record():
    res = parse_ohlc(HEADER + "2020-01-02,100,101,99,100.5")
    assert res.records == [OhlcRecord(dt.date(2020, 1, 2), 100.0, 101.0, 99.0, 100.5)]
    assert res.errors == []


def test_low_above_high_is_rejected_with_line_number():
    text = HEADER + "2020-01-02,100,101,99,100.5\n2020-01-03,100,99,101,100\n2020-01-06,1,2,1,1.5\n"
    res = parse_ohlc(text)
    assert [r.date.day for r in res.records] == [2, 6]
    assert res.rejected_lines == [3]


def test_shuffled_dates_are_sorted_with_warning():
    text = HEADER + "2020-01-06,1,2,1,1\n2020-01-02,1,2,1,1\n2020-01-03,1,2,1,1\n"
    with pytest.warns(UnsortedInputWarning):
        res = parse_ohlc(text)
    assert [r.date.day for r in res.records] == [2, 3, 6]


def test_sorted_input_emits_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        parse_ohlc(HEADER + "2020-01-02,1,2,1,1\n2020-01-03,1,2,1,1\n")


def test_tab_delimiter_compact_dates_and_header_case():
    text = "Date\tOpen\tHigh\tLow\tClose\tVolume\n20200102\t10\t11\t9\t10\t5000\n"
    res = parse_ohlc(text)
    assert res.records[0].date == dt.date(2020, 1, 2)
    assert res.records[0].high == 11.0


def test_column_order_is_taken_from_header():
    res = parse_ohlc("close,low,high,open,date\n10,9,11,10.5,2020-01-02\n")
    assert res.records[0] == OhlcRecord(dt.date(2020, 1, 2), 10.5, 11.0, 9.0, 10.0)


def test_missing_column():
    with pytest.raises(InputDataError, match="close"):
        parse_ohlc("date,open,high,low\n2020-01-02,1,2,1\n")


def test_duplicate_dates_rejected():
    res = parse_ohlc(HEADER + "2020-01-02,1,2,1,1\n2020-01-02,1,3,1,1\n")
    assert len(res.records) == 1 and res.records[0].high == 2.0
    assert res.rejected_lines == [3]
    assert "duplicate" in res.errors[0][1]


def test_unparseable_rows_are_collected():
    text = HEADER + "2020-01-02,1,2,1,1\nnot-a-date,1,2,1,1\n2020-01-03,x,2,1,1\n2020-01-06,1,2\n"
    res = parse_ohlc(text)
    assert len(res.records) == 1
    assert res.rejected_lines == [3, 4, 5]


def test_blank_lines_are_ignored():
    res = parse_ohlc("\n" + HEADER + "\n2020-01-02,1,2,1,1\n\n")
    assert len(res.records) == 1 and res.errors == []


def test_error_cap():
    bad = "".join(f"2020-01-{d:02d},1,1,2,1\n" for d in range(1, 12))
    assert len(parse_ohlc(HEADER + bad, max_errors=11).errors) == 11
    with pytest.raises(InputDataError, match="more than 10"):
        parse_ohlc(HEADER + bad, max_errors=10)


def test_default_error_cap_is_one_hundred():
    start = dt.date(2000, 1, 1)
    rows = [f"{start + dt.timedelta(days=k)},1,1,2,1\n" for k in range(101)]
    assert len(parse_ohlc(HEADER + "".join(rows[:100])).errors) == 100
    with pytest.raises(InputDataError):
        parse_ohlc(HEADER + "".join(rows))


def test_empty_input():
    with pytest.raises(InputDataError):
        parse_ohlc("")


def test_parse_date_forms():
    assert parse_date("2021-03-04") == parse_date("20210304") == dt.date(2021, 3, 4)
    with pytest.raises(ValueError):
        parse_date("04/03/2021")


@pytest.mark.parametrize("prices", [(0, 1, 0, 1), (1, 2, 1, -1), (1, 2, 1.5, 1.7), (3, 2, 1, 1.5),
                                    (1, math.inf, 1, 1)])
def test_record_invariants(prices):
    with pytest.raises(InputDataError):
        OhlcRecord(dt.date(2020, 1, 2), *prices)


# ---------------------------------------------------------------------------
# Round trip
# ---------------------------------------------------------------------------

@st.composite
def _records(draw):
    n = draw(st.integers(1, 20))
    start = dt.date(1990, 1, 1) + dt.timedelta(days=draw(st.integers(0, 10_000)))
    offsets = sorted(draw(st.sets(st.integers(0, 2000), min_size=n, max_size=n)))
    price = st.floats(1e-3, 1e6, allow_nan=False, allow_infinity=False)
    out = []
    for k in offsets:
        vals = sorted(draw(st.lists(price, min_size=4, max_size=4)))
        lo, a, b, hi = vals
        o, c = (a, b) if draw(st.booleans()) else (b, a)
        out.append(OhlcRecord(start + dt.timedelta(days=k), o, hi, lo, c))
    return out


@given(_records())
def test_write_then_parse_is_identity(records):
    buf = io.StringIO()
    write_ohlc(records, buf)
    res = parse_ohlc(buf.getvalue())
    assert res.records == records and res.errors == []


# ---------------------------------------------------------------------------
# Magnitude proxies
# ---------------------------------------------------------------------------

def test_log_range_of_e_ratio_is_zero():
    rec = OhlcRecord(dt.date(2020, 1, 2), 2.0, 2.0 * math.e, 2.0, 3.0)
    s = magnitude_series([rec], "log_range")
    assert daily_range(rec) == pytest.approx(1.0)
    assert s.values[0] == pytest.approx(0.0, abs=1e-15)


def test_relative_range_hand_value():
    rec = OhlcRecord(dt.date(2020, 1, 2), 100.0, 101.0, 99.0, 100.0)
    assert daily_range(rec, "relative_range") == pytest.approx(0.02)
    s = magnitude_series([rec], "relative-range")
    assert s.values[0] == pytest.approx(math.log(0.02))
    assert s.values[0] == pytest.approx(-3.912, abs=5e-4)
    assert s.proxy_kind == "relative_range"


def test_default_proxy_is_log_range():
    rec = _rec(2)
    assert magnitude_series([rec]).values[0] == pytest.approx(math.log(math.log(101 / 99)))


def test_unknown_proxy():
    with pytest.raises(ParameterError):
        magnitude_series([_rec(2)], "parkinson")


@pytest.mark.parametrize("kind", ["log_range", "relative_range"])
@given(close=st.floats(1.0, 100.0), a=st.floats(1e-4, 1.0), b=st.floats(1e-4, 1.0))
def test_proxy_monotone_with_close_at_high(kind, close, a, b):
    def omega(r):
        rec = OhlcRecord(dt.date(2020, 1, 2), close, close, close * math.exp(-r), close)
        return magnitude_series([rec], kind).values[0]

    small, big = sorted((a, b))
    if close * math.exp(-small) == close * math.exp(-big):  # same low after rounding
        return
    assert omega(small) < omega(big)


@pytest.mark.parametrize("kind", ["log_range", "relative_range"])
@given(close=st.floats(1.0, 100.0), a=st.floats(1e-4, 1.0), b=st.floats(1e-4, 1.0))
def test_proxy_monotone_with_close_at_low(kind, close, a, b):
    if a == b:
        return

    def omega(r):
        rec = OhlcRecord(dt.date(2020, 1, 2), close, close * math.exp(r), close, close)
        return magnitude_series([rec], kind).values[0]

    small, big = sorted((a, b))
    if omega(small) == omega(big):  # ratios equal after float rounding
        return
    assert omega(small) < omega(big)


def test_zero_range_days_are_skipped_with_warning():
    recs = [_rec(2), _rec(3, 1.0, 1.0, 1.0, 1.0), _rec(6)]
    with pytest.warns(SkippedRecordWarning):
        s = magnitude_series(recs)
    assert len(s) == 2 and s.n_skipped == 1
    assert s.dates == (dt.date(2020, 1, 2), dt.date(2020, 1, 6))


def test_empty_and_all_skipped():
    with pytest.raises(InputDataError):
        magnitude_series([])
    with pytest.raises(InputDataError), pytest.warns(SkippedRecordWarning):
        magnitude_series([_rec(2, 1.0, 1.0, 1.0, 1.0)])


def test_trading_day_indexing_ignores_calendar_gaps():
    recs = [_rec(2), _rec(3), _rec(6), _rec(27)]
    s = magnitude_series(recs)
    ms = s.as_magnitude_series()
    assert ms.h == 1.0 and ms.n == len(recs)
    buf = io.StringIO()
    write_magnitude_series(s, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,date,omega"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "1", "2", "3"]
    assert lines[4].split(",")[1] == "2020-01-27"


# ---------------------------------------------------------------------------
# Synthetic bars
# ---------------------------------------------------------------------------

def test_synthetic_bars_are_valid_weekdays_and_deterministic():
    p = CascadeParams(0.01, 1.0)
    a = synthetic_ohlc(300, p, seed=4)
    b = synthetic_ohlc(300, p, seed=4)
    assert a == b
    assert len(a) == 300
    assert all(r.date.weekday() < 5 for r in a)
    assert all(x.date < y.date for x, y in zip(a, a[1:]))
    assert all(x.close == pytest.approx(y.open) for x, y in zip(a, a[1:]))


def test_synthetic_bars_without_intermittency_have_constant_daily_variance():
    recs = synthetic_ohlc(4000, CascadeParams(0.0, 1.0, sigma2=1e-4), seed=2, substeps=1)
    r = np.log([b.close / b.open for b in recs])
    se = 1e-4 * math.sqrt(2.0 / r.size)
    assert abs(np.mean(r ** 2) - 1e-4) <= 4 * se
