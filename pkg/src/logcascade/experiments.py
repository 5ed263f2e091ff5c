"""Reproducible experiments: covariance and variance of the field, windowed
covariance of the magnitude and the apparent integral scale.

Every experiment returns an :class:`ExperimentResult` holding plain column
tables (ready for CSV) and a JSON-friendly summary with pass/fail flags.
Theoretical curves always come from closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._random import SeedLike, as_seed_sequence, replica_seeds, seed_record
from .cascade_measure import build_measure, build_mrw
from .cone import sample_path_cone
from .errors import InputDataError, ParameterError
from .estimators import (
    CovarianceEstimate,
    MagnitudeSeries,
    empirical_covariance,
    expected_cov_approx,
    fit_log_decay,
    integral_scale_scan,
    magnitude_from_measure,
    scan_regression,
)
from .gaussian_field import (
    DENSE_MAX_POINTS,
    CascadeParams,
    TimeGrid,
    cov_nonstationary,
    sample_path,
    sample_path_blocks,
    sample_paths,
    variance_nonstationary,
)

DEFAULT_DELTA_TS = (16, 32, 64, 128, 256, 512)
FIG4_T2 = (10, 40, 150, 500)
APPARENT_OFFSET = -1.5  # ln(T_hat / delta_t) predicted for the aging model


@dataclass
class ExperimentResult:
    name: str
    tables: dict = field(default_factory=dict)  # name -> {column: array}
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("pass", False))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Simulation:
    omega: object
    measure: object
    mrw: object
    summary: dict


def simulate(
    kind: str, grid: TimeGrid, p: CascadeParams, seed: SeedLike, method: str = "dense",
    scale_resolution: int = 8,
) -> Simulation:
    """Field, measure and walk on ``grid``.

    ``method`` is ``"dense"`` (exact; block-wise beyond the dense size limit)
    or ``"cone"``.
    """
    ss = as_seed_sequence(seed)
    field_seed, walk_seed = replica_seeds(ss, 2)
    if method == "dense":
        if grid.n <= DENSE_MAX_POINTS:
            omega = sample_path(kind, grid, p, field_seed)
        else:
            omega = sample_path_blocks(kind, grid, p, field_seed)
    elif method == "cone":
        omega = sample_path_cone(kind, grid, p, field_seed, scale_resolution)
    else:
        raise ParameterError(f"unknown method {method!r}; use 'dense' or 'cone'")
    m = build_measure(omega)
    x = build_mrw(m, walk_seed)
    span = grid.n * grid.dt
    summary = {
        "n": grid.n,
        "omega_mean": float(omega.values.mean()),
        "omega_var": float(omega.values.var()),
        "measure_over_t": float(m.cumulative[-1] / span),
        "sigma2": p.sigma2,
        "seed": seed_record(ss),
        "method": method,
        "block_wise": grid.n > DENSE_MAX_POINTS and method == "dense",
    }
    return Simulation(omega, m, x, summary)


# ---------------------------------------------------------------------------
# Field covariance and variance
# ---------------------------------------------------------------------------

def _field_defaults(lambda2, ell, n, dt, t0):
    dt = ell if dt is None else dt
    t0 = dt if t0 is None else t0
    return CascadeParams(lambda2=lambda2, cutoff=ell), TimeGrid(t0, dt, n)


def reproduce_fig4(
    seed: SeedLike, reps: int = 500, lambda2: float = 1.0, ell: float = 1.0, n: int = 500,
    dt: float | None = None, t0: float | None = None, t2_list: Sequence[float] = FIG4_T2,
    min_lag: float | None = None, min_fraction: float = 0.95,
) -> ExperimentResult:
    """Empirical ``Cov(omega(t1), omega(t2))`` of the aging field against its closed form.

    Lags ``t2 - t1 >= min_lag`` (default ``2 ell``) enter the pass fraction;
    a lag passes when it is within 3 Monte-Carlo standard errors.
    """
    p, grid = _field_defaults(lambda2, ell, n, dt, t0)
    min_lag = 2 * ell if min_lag is None else min_lag
    x = sample_paths("nonstationary", grid, p, reps, seed)
    xc = x - x.mean(axis=0)
    t = grid.times
    rows = {k: [] for k in ("t2", "t1", "lag", "cov", "stderr", "theory")}
    hits = total = 0
    per_t2 = {}
    for t2 in t2_list:
        j = int(np.argmin(np.abs(t - t2)))
        if not math.isclose(t[j], t2, rel_tol=1e-9, abs_tol=1e-12):
            raise ParameterError(f"t2={t2} is not a grid time")
        prods = xc[:, : j + 1] * xc[:, j : j + 1]
        cov = prods.sum(axis=0) / (reps - 1)
        se = prods.std(axis=0, ddof=1) / math.sqrt(reps)
        th = cov_nonstationary(t[: j + 1], t[j], p)
        lag = t[j] - t[: j + 1]
        ok = np.abs(cov - th) <= 3 * se
        use = lag >= min_lag - 1e-12
        per_t2[float(t2)] = float(ok[use].mean()) if use.any() else None
        hits += int(ok[use].sum())
        total += int(use.sum())
        for key, col in zip(rows, (np.full(j + 1, t[j]), t[: j + 1], lag, cov, se, th)):
            rows[key].append(col)
    table = {k: np.concatenate(v) for k, v in rows.items()}
    frac = hits / total if total else float("nan")
    theory = {"t1": t, **{f"t2={t2:g}": cov_nonstationary(t, float(t2), p) for t2 in t2_list}}
    return ExperimentResult(
        "fig4",
        {"covariance": table, "theory": theory},
        {
            "lambda2": lambda2, "ell": ell, "n": n, "reps": reps,
            "seed": seed_record(as_seed_sequence(seed)),
            "fraction_within_3se": frac, "fraction_by_t2": per_t2,
            "n_lags_tested": total, "min_fraction": min_fraction,
            "pass": bool(frac >= min_fraction),
        },
    )


def reproduce_fig5(
    seed: SeedLike, reps: int = 500, lambda2: float = 1.0, ell: float = 1.0, n: int = 500,
    dt: float | None = None, t0: float | None = None,
    fit_range: tuple = (10.0, 500.0), slope_tol: float = 0.05, intercept_tol: float = 0.15,
) -> ExperimentResult:
    """Empirical ``Var[omega(t)]`` and its regression on ``ln t``.

    The closed form is ``lambda2 * (1 + ln(t/ell))``: slope ``lambda2`` and,
    for ``ell = 1``, intercept ``lambda2``.
    """
    p, grid = _field_defaults(lambda2, ell, n, dt, t0)
    x = sample_paths("nonstationary", grid, p, reps, seed)
    t = grid.times
    var = x.var(axis=0, ddof=1)
    dev2 = (x - x.mean(axis=0)) ** 2
    se = dev2.std(axis=0, ddof=1) / math.sqrt(reps)
    th = variance_nonstationary(t, p)
    lo, hi = fit_range
    sel = (t >= lo * ell - 1e-12) & (t <= hi * ell + 1e-12)
    if sel.sum() < 2:
        raise ParameterError("fit range holds fewer than 2 grid times")
    slope, intercept = np.polyfit(np.log(t[sel]), var[sel], 1)
    want_slope = lambda2
    want_intercept = lambda2 * (1.0 - math.log(ell))
    slope_ok = abs(slope - want_slope) <= slope_tol * lambda2
    inter_ok = abs(intercept - want_intercept) <= intercept_tol * lambda2
    within = np.abs(var - th) <= 3 * se
    alive = t >= ell
    return ExperimentResult(
        "fig5",
        {"variance": {"t": t, "variance": var, "stderr": se, "theory": th}},
        {
            "lambda2": lambda2, "ell": ell, "n": n, "reps": reps,
            "seed": seed_record(as_seed_sequence(seed)),
            "slope": float(slope), "intercept": float(intercept),
            "expected_slope": want_slope, "expected_intercept": want_intercept,
            "slope_ok": bool(slope_ok), "intercept_ok": bool(inter_ok),
            "fraction_within_3se": float(within[alive].mean()),
            "all_within_3se": bool(within[alive].all()),
            "pass": bool(slope_ok and inter_ok),
        },
    )


# ---------------------------------------------------------------------------
# Apparent integral scale
# ---------------------------------------------------------------------------

def synthetic_magnitudes(
    seed: SeedLike, reps: int = 1, lambda2: float = 0.01, ell: float = 1.0,
    length: int = 20_000, h: float | None = None, sigma2: float = 1.0,
    block_len: int = DENSE_MAX_POINTS,
) -> list[MagnitudeSeries]:
    """Magnitude series ``ln(delta_h M)`` of independent aging-model paths.

    Paths are sampled block-wise at step ``h`` (default ``ell``).
    """
    h = ell if h is None else h
    p = CascadeParams(lambda2=lambda2, cutoff=ell, sigma2=sigma2)
    grid = TimeGrid(0.0, h, length)
    out = []
    for ss in replica_seeds(seed, reps):
        omega = sample_path_blocks("nonstationary", grid, p, ss, block_len)
        out.append(magnitude_from_measure(build_measure(omega), h))
    return out


def pooled_window_covariance(
    series: Sequence[MagnitudeSeries], delta_t: float, max_lag_n: int
) -> CovarianceEstimate:
    """Windowed covariance averaged over the disjoint windows of several series."""
    h = series[0].h
    n_sub = int(round(delta_t / h))
    windows = []
    for s in series:
        n_win = s.n // n_sub
        windows.append(s.values[: n_win * n_sub].reshape(n_win, n_sub))
    w = np.vstack(windows)
    if w.shape[0] < 2:
        raise InputDataError(f"fewer than 2 windows of length {delta_t}")
    per = empirical_covariance(w, max_lag_n)
    return CovarianceEstimate(
        lags=h * np.arange(max_lag_n + 1), values=per.mean(axis=0),
        stderr=per.std(axis=0, ddof=1) / math.sqrt(w.shape[0]),
        delta_t=n_sub * h, n_subsamples=w.shape[0],
    )


def reproduce_fig6c(
    seed: SeedLike, reps: int = 1, lambda2: float = 0.01, ell: float = 1.0,
    length: int = 20_000, delta_ts: Sequence[float] = DEFAULT_DELTA_TS,
    min_fraction: float = 0.95,
) -> ExperimentResult:
    """Windowed magnitude covariance for several window lengths.

    Each curve is compared with the first-order closed form on lags
    ``[2h, delta_t/4]``; a lag passes when within 3 standard errors.
    """
    series = synthetic_magnitudes(seed, reps, lambda2, ell, length,
                                  block_len=_block_len(delta_ts, ell))
    h = series[0].h
    tables, per_dt = {}, {}
    hits = total = 0
    for d in delta_ts:
        max_lag = int(d / (4 * h))
        cov = pooled_window_covariance(series, float(d), max_lag)
        lags = cov.lags
        theory = np.full(lags.shape, np.nan)
        theory[1:] = expected_cov_approx(lags[1:], float(d), lambda2)
        fit = fit_log_decay(cov, 2 * h, d / 4)
        sel = lags >= 2 * h - 1e-12
        ok = np.abs(cov.values[sel] - theory[sel]) <= 3 * cov.stderr[sel]
        hits += int(ok.sum())
        total += int(sel.sum())
        tables[f"covariance_dt{d:g}"] = {
            "lag": lags, "value": cov.values, "stderr": cov.stderr, "theory": theory,
        }
        per_dt[f"{d:g}"] = {
            "n_subsamples": cov.n_subsamples,
            "fraction_within_3se": float(ok.mean()),
            "lambda2_hat": fit.lambda2_hat, "T_hat": fit.T_hat,
            "degenerate": fit.degenerate,
        }
    frac = hits / total if total else float("nan")
    return ExperimentResult(
        "fig6c", tables,
        {
            "lambda2": lambda2, "ell": ell, "length": length, "reps": reps,
            "seed": seed_record(as_seed_sequence(seed)), "by_delta_t": per_dt,
            "fraction_within_3se": frac, "min_fraction": min_fraction,
            "all_degenerate": all(v["degenerate"] for v in per_dt.values()),
            "pass": bool(frac >= min_fraction),
        },
    )


def _block_len(delta_ts, h) -> int:
    return int(min(DENSE_MAX_POINTS, max(8 * max(delta_ts) / h, 1)))


def scan_summary(scan, slope_tol: float = 0.15, offset_tol: float = 0.3) -> dict:
    reg = scan_regression(scan)
    ok = (
        reg["slope"] is not None
        and abs(reg["slope"] - 1.0) <= slope_tol
        and abs(reg["mean_offset"] - APPARENT_OFFSET) <= offset_tol
    )
    return {**reg, "expected_slope": 1.0, "expected_offset": APPARENT_OFFSET,
            "slope_tol": slope_tol, "offset_tol": offset_tol, "pass": bool(ok)}


def scan_table(scan) -> dict:
    t = scan.table()
    dts = np.asarray(t["delta_t"], dtype=float)
    return {**{k: np.asarray([np.nan if v is None else v for v in col], dtype=float)
               for k, col in t.items()},
            "theory": math.exp(APPARENT_OFFSET) * dts}


def reproduce_fig8(
    seed: SeedLike, lambda2: float = 0.01, ell: float = 1.0, length: int = 20_000,
    delta_ts: Sequence[float] = DEFAULT_DELTA_TS,
) -> ExperimentResult:
    """Apparent integral scale against window length on one aging-model path."""
    (s,) = synthetic_magnitudes(seed, 1, lambda2, ell, length,
                                block_len=_block_len(delta_ts, ell))
    scan = integral_scale_scan(s, [float(d) for d in delta_ts])
    summary = scan_summary(scan)
    summary.update({"lambda2": lambda2, "ell": ell, "length": length,
                    "seed": seed_record(as_seed_sequence(seed))})
    return ExperimentResult("fig8", {"scan": scan_table(scan)}, summary)


FIGURES = {
    "fig4": reproduce_fig4,
    "fig5": reproduce_fig5,
    "fig6c": reproduce_fig6c,
    "fig8": reproduce_fig8,
}
