"""Daily OHLC ingestion and range-based log-volatility series."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence, TextIO, Union

import numpy as np

from ._random import SeedLike, as_seed_sequence
from .errors import InputDataError, ParameterError
from .estimators import MagnitudeSeries
from .gaussian_field import CascadeParams, TimeGrid, sample_path_blocks

ProxyKind = Literal["log_range", "relative_range"]
PROXY_KINDS = ("log_range", "relative_range")
REQUIRED_COLUMNS = ("date", "open", "high", "low", "close")
MAX_PARSE_ERRORS = 100


class UnsortedInputWarning(UserWarning):
    pass


class SkippedRecordWarning(UserWarning):
    pass


@dataclass(frozen=True, order=True)
class OhlcRecord:
    date: _dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(x) and x > 0 for x in prices):
            raise InputDataError(f"{self.date}: prices must be finite and positive")
        if not self.low <= min(self.open, self.close) <= max(self.open, self.close) <= self.high:
            raise InputDataError(
                f"{self.date}: violates low <= open, close <= high "
                f"(o={self.open}, h={self.high}, l={self.low}, c={self.close})"
            )


@dataclass(frozen=True)
class ParseResult:
    records: list
    errors: list = field(default_factory=list)  # (line number, message)

    @property
    def rejected_lines(self) -> list:
        return [line for line, _ in self.errors]


@dataclass(frozen=True)
class DailyMagnitudeSeries:
    dates: tuple
    values: np.ndarray
    proxy_kind: str
    n_skipped: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.dates),):
            raise InputDataError("dates and values must have the same length")
        if not np.all(np.isfinite(values)):
            raise InputDataError("magnitude values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def as_magnitude_series(self) -> MagnitudeSeries:
        """Trading-day indexed series with ``h = 1``."""
        return MagnitudeSeries(h=1.0, values=self.values, origin=0.0)


def parse_date(text: str) -> _dt.date:
    """ISO-8601 (``2020-01-02``) or compact (``20200102``) calendar date."""
    text = text.strip()
    if len(text) == 8 and text.isdigit():
        return _dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))
    return _dt.date.fromisoformat(text[:10])


def _sniff_delimiter(header: str) -> str:
    if "\t" in header:
        return "\t"
    if "," in header:
        return ","
    raise InputDataError("header line must be comma- or tab-separated")


def parse_ohlc(
    source: Union[str, TextIO, Iterable[str]], max_errors: int = MAX_PARSE_ERRORS
) -> ParseResult:
    """Parse delimiter-separated daily OHLC text.

    ``source`` is a text stream, an iterable of lines, or a string holding the
    whole file.  Bad rows are collected with their 1-based line numbers and
    parsing continues; once more than ``max_errors`` rows were rejected an
    :class:`InputDataError` is raised.  Records come back sorted by date, with
    an :class:`UnsortedInputWarning` if the input was not.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = iter(source)
    header = ""
    line_no = 0
    for header in lines:
        line_no += 1
        if header.strip():
            break
    else:
        raise InputDataError("empty input")
    delim = _sniff_delimiter(header)
    names = [h.strip().lower() for h in next(csv.reader([header], delimiter=delim))]
    missing = [c for c in REQUIRED_COLUMNS if c not in names]
    if missing:
        raise InputDataError(f"missing required column(s): {', '.join(missing)}")
    col = {c: names.index(c) for c in REQUIRED_COLUMNS}
    width = max(col.values()) + 1

    records: list[OhlcRecord] = []
    errors: list[tuple[int, str]] = []
    seen: dict = {}

    def reject(n: int, msg: str):
        errors.append((n, msg))
        if len(errors) > max_errors:
            raise InputDataError(
                f"more than {max_errors} bad rows; first errors: "
                + "; ".join(f"line {k}: {m}" for k, m in errors[:5])
            )

    for row in csv.reader(lines, delimiter=delim):
        line_no += 1
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < width:
            reject(line_no, f"expected at least {width} fields, got {len(row)}")
            continue
        try:
            date = parse_date(row[col["date"]])
            o, h, lo, c = (float(row[col[k]]) for k in ("open", "high", "low", "close"))
        except ValueError as exc:
            reject(line_no, f"unparseable row: {exc}")
            continue
        try:
            rec = OhlcRecord(date, o, h, lo, c)
        except InputDataError as exc:
            reject(line_no, str(exc))
            continue
        if date in seen:
            reject(line_no, f"duplicate date {date} (first seen on line {seen[date]})")
            continue
        seen[date] = line_no
        records.append(rec)

    if any(a.date > b.date for a, b in zip(records, records[1:])):
        warnings.warn("input dates were not ascending; records sorted", UnsortedInputWarning,
                      stacklevel=2)
        records.sort(key=lambda r: r.date)
    return ParseResult(records, errors)


def write_ohlc(records: Sequence[OhlcRecord], out: TextIO) -> None:
    """Write records in the format read by :func:`parse_ohlc` (lossless)."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REQUIRED_COLUMNS)
    for r in records:
        w.writerow([r.date.isoformat(), repr(r.open), repr(r.high), repr(r.low), repr(r.close)])


def _normalize_proxy(proxy_kind: str) -> str:
    kind = proxy_kind.replace("-", "_")
    if kind not in PROXY_KINDS:
        raise ParameterError(f"proxy_kind must be one of {PROXY_KINDS}, got {proxy_kind!r}")
    return kind


def daily_range(rec: OhlcRecord, proxy_kind: str = "log_range") -> float:
    """``ln(high/low)`` or ``(high - low)/close``."""
    if _normalize_proxy(proxy_kind) == "log_range":
        return math.log(rec.high / rec.low)
    return (rec.high - rec.low) / rec.close


def magnitude_series(
    records: Sequence[OhlcRecord], proxy_kind: str = "log_range"
) -> DailyMagnitudeSeries:
    """Log of the daily range, one value per retained trading day.

    Days with ``high == low`` are skipped with a :class:`SkippedRecordWarning`.
    """
    kind = _normalize_proxy(proxy_kind)
    if not records:
        raise InputDataError("no records")
    dates, values = [], []
    for rec in records:
        if rec.high > rec.low:
            dates.append(rec.date)
            values.append(math.log(daily_range(rec, kind)))
    skipped = len(records) - len(dates)
    if skipped:
        warnings.warn(f"skipped {skipped} zero-range day(s)", SkippedRecordWarning, stacklevel=2)
    if not dates:
        raise InputDataError("every record has zero range")
    return DailyMagnitudeSeries(tuple(dates), np.array(values), kind, skipped)


def synthetic_ohlc(
    n_days: int,
    params: CascadeParams,
    seed: SeedLike = None,
    substeps: int = 16,
    start: _dt.date = _dt.date(2000, 1, 3),
    price0: float = 100.0,
) -> list[OhlcRecord]:
    """Daily bars of a log-price driven by the cascade over consecutive days.

    Day ``k`` carries the measure mass ``sigma2 * exp(omega_k)`` (one-day
    cells, non-stationary field, sampled block-wise).  The intraday log-price
    is a Brownian path with that total variance, observed at ``substeps``
    points to form open/high/low/close.  Dates run over consecutive weekdays.
    """
    if n_days < 1 or substeps < 1:
        raise ParameterError("n_days and substeps must be >= 1")
    ss = as_seed_sequence(seed)
    field_seed, price_seed = ss.spawn(2)
    grid = TimeGrid(0.0, 1.0, n_days)
    omega = sample_path_blocks("nonstationary", grid, params, field_seed).values
    mass = params.sigma2 * np.exp(omega)
    rng = np.random.default_rng(price_seed)
    steps = rng.standard_normal((n_days, substeps)) * np.sqrt(mass / substeps)[:, None]
    paths = np.cumsum(steps, axis=1)
    # open of day k is the close of day k-1
    close_lvl = np.cumsum(paths[:, -1])
    open_lvl = np.concatenate([[0.0], close_lvl[:-1]])
    intraday = open_lvl[:, None] + paths
    hi = np.maximum(intraday.max(axis=1), open_lvl)
    lo = np.minimum(intraday.min(axis=1), open_lvl)
    base = math.log(price0)
    out = []
    day = start
    for k in range(n_days):
        while day.weekday() >= 5:
            day += _dt.timedelta(days=1)
        o, h, l_, c = np.exp(base + np.array([open_lvl[k], hi[k], lo[k], close_lvl[k]]))
        out.append(OhlcRecord(day, float(o), float(max(h, o, c)), float(min(l_, o, c)), float(c)))
        day += _dt.timedelta(days=1)
    return out


def write_magnitude_series(s: DailyMagnitudeSeries, out: TextIO) -> None:
    """``k,date,omega`` CSV."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "date", "omega"])
    for k, (d, v) in enumerate(zip(s.dates, s.values)):
        w.writerow([k, d.isoformat(), repr(float(v))])
