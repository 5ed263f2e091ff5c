"""
Estimation of magnitude correlations and scaling exponents.

The magnitude is the log-volatility proxy ``ln(M(t+h) - M(t))``, sampled at
rate ``h``.  Its empirical covariance on a window of ``N`` samples,

    C_hat(n) = 1/(N-n) * sum_{i<N-n} (x_i - mean)(x_{i+n} - mean),

is biased by the subtraction of the window mean.  For a stationary sequence
with covariance ``C`` the bias is exact and given by :func:`expected_bias_exact`;
for a log-correlated sequence it reduces to the closed form of
:func:`expected_cov_approx`, whose apparent integral scale is
``exp(-3/2) * N h`` whatever the true one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cascade_measure import MeasurePath, MrwPath
from .errors import EstimationError, InputDataError, ParameterError
from .gaussian_field import GaussianLogVolPath

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class MagnitudeSeries:
    """Magnitude samples at step ``h`` starting at ``origin``."""

    h: float
    values: np.ndarray
    origin: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise InputDataError("a magnitude series needs at least 2 samples")
        if not np.all(np.isfinite(values)):
            raise InputDataError("magnitude values must be finite")
        if not self.h > 0:
            raise ParameterError("h must be > 0")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def span(self) -> float:
        return self.n * self.h


@dataclass(frozen=True)
class CovarianceEstimate:
    lags: np.ndarray
    values: np.ndarray
    stderr: Optional[np.ndarray]
    delta_t: float
    n_subsamples: int
    meta: dict = field(default_factory=dict)

    @property
    def lag_index(self) -> np.ndarray:
        h = self.lags[1] - self.lags[0] if self.lags.size > 1 else 1.0
        return np.rint(self.lags / h).astype(int)


@dataclass(frozen=True)
class ScalingFit:
    """Fit of ``C(tau) = lambda2 * ln(T / tau)`` on a lag range."""

    lambda2_hat: float
    T_hat: Optional[float]
    lag_range: tuple
    residual_rms: float
    param_cov: np.ndarray  # covariance of (intercept, slope)
    n_lags: int
    intercept: float = 0.0
    degenerate: bool = False
    ln_T_stderr: Optional[float] = None


@dataclass(frozen=True)
class ScanRow:
    delta_t: float
    n_subsamples: int
    lambda2_hat: float
    T_hat: Optional[float]
    ln_T_stderr: Optional[float]
    T_stderr: Optional[float]
    degenerate: bool


@dataclass(frozen=True)
class IntegralScaleScan:
    rows: list
    covariances: dict  # delta_t -> CovarianceEstimate
    fits: dict  # delta_t -> ScalingFit

    def table(self) -> dict:
        return {
            "delta_t": [r.delta_t for r in self.rows],
            "n_subsamples": [r.n_subsamples for r in self.rows],
            "lambda2": [r.lambda2_hat for r in self.rows],
            "T": [r.T_hat for r in self.rows],
            "T_stderr": [r.T_stderr for r in self.rows],
            "ln_T_stderr": [r.ln_T_stderr for r in self.rows],
            "degenerate": [r.degenerate for r in self.rows],
        }


@dataclass(frozen=True)
class StructureFunctions:
    """Absolute increment moments and derived scaling diagnostics.

    ``moments[i, j]`` is ``E|Y(t + tau_j) - Y(t)|^q_i``.  ``zeta_curvature``
    and ``c_q`` are second derivatives in ``q`` (NaN at the ends of the grid)
    of ``zeta_hat`` and of the log-moment at the smallest lag.
    """

    q: np.ndarray
    tau: np.ndarray
    moments: np.ndarray
    zeta_hat: np.ndarray
    zeta_stderr: np.ndarray
    c_q: np.ndarray
    zeta_curvature: np.ndarray
    kurtosis: np.ndarray
    moment_stderr: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Magnitudes and covariance estimators
# ---------------------------------------------------------------------------

def _steps(h: float, dt: float) -> int:
    k = int(round(h / dt))
    if k < 1 or not math.isclose(k * dt, h, rel_tol=_GRID_RTOL):
        raise ParameterError(f"h={h} is not an integer multiple of dt={dt}")
    return k


def magnitude_from_measure(m: MeasurePath, h: float) -> MagnitudeSeries:
    """``ln(M(t0 + (k+1) h) - M(t0 + k h))`` for every complete span ``h``."""
    k = _steps(h, m.grid.dt)
    n_out = m.grid.n // k
    if n_out < 2:
        raise InputDataError("path too short for two magnitude samples")
    blocks = m.increments[: n_out * k].reshape(n_out, k).sum(axis=1)
    bad = np.flatnonzero(~(blocks > 0))
    if bad.size:
        raise EstimationError(f"non-positive measure increment at magnitude index {bad[0]}")
    return MagnitudeSeries(h=h, values=np.log(blocks), origin=m.grid.t0)


def magnitude_from_field(path: GaussianLogVolPath, h: float) -> MagnitudeSeries:
    """Field values sampled every ``h`` (the direct, noise-free proxy)."""
    k = _steps(h, path.grid.dt)
    return MagnitudeSeries(h=h, values=path.values[::k], origin=path.grid.t0)


def empirical_covariance(x, max_lag: int) -> np.ndarray:
    """Mean-removed covariance estimator on the last axis of ``x``.

    Returns an array with the lag axis last, ``max_lag + 1`` entries.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not 0 <= max_lag < n:
        raise EstimationError(f"max_lag={max_lag} must be in [0, {n - 1}]")
    xc = x - x.mean(axis=-1, keepdims=True)
    out = np.empty(x.shape[:-1] + (max_lag + 1,))
    for lag in range(max_lag + 1):
        out[..., lag] = np.einsum("...i,...i->...", xc[..., : n - lag], xc[..., lag:]) / (n - lag)
    return out


def magnitude_covariance(s: MagnitudeSeries, max_lag_n: int) -> CovarianceEstimate:
    """Covariance estimate of a whole series at lags ``0..max_lag_n`` (in steps)."""
    if max_lag_n >= s.n:
        raise EstimationError(f"max_lag_n={max_lag_n} must be < N={s.n}")
    vals = empirical_covariance(s.values, max_lag_n)
    return CovarianceEstimate(
        lags=s.h * np.arange(max_lag_n + 1), values=vals, stderr=None,
        delta_t=s.span, n_subsamples=1,
    )


def subsampled_covariance(s: MagnitudeSeries, delta_t: float, max_lag_n: int) -> CovarianceEstimate:
    """Average covariance over consecutive disjoint windows of length ``delta_t``.

    Samples left over at the end of the series are dropped.  The standard
    error is the window-to-window dispersion divided by the square root of
    the number of windows.  A window covering the whole series reduces to
    :func:`magnitude_covariance`.
    """
    n_sub = _steps(delta_t, s.h)
    if n_sub > s.n:
        raise InputDataError(
            f"series too short: {s.n} samples for a window of {n_sub} samples"
        )
    n_win = s.n // n_sub
    if n_win == 1 and n_sub == s.n:
        return magnitude_covariance(s, max_lag_n)
    if n_win < 2:
        raise InputDataError(
            f"series too short: {s.n} samples give fewer than 2 windows of {n_sub}"
        )
    if max_lag_n >= n_sub:
        raise EstimationError(f"max_lag_n={max_lag_n} must be < window size {n_sub}")
    windows = s.values[: n_win * n_sub].reshape(n_win, n_sub)
    per_window = empirical_covariance(windows, max_lag_n)
    return CovarianceEstimate(
        lags=s.h * np.arange(max_lag_n + 1),
        values=per_window.mean(axis=0),
        stderr=per_window.std(axis=0, ddof=1) / math.sqrt(n_win),
        delta_t=n_sub * s.h,
        n_subsamples=n_win,
    )


# ---------------------------------------------------------------------------
# Bias of the estimator
# ---------------------------------------------------------------------------

CovLike = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray]


def _cov_table(cov_fn: CovLike, N: int) -> np.ndarray:
    if callable(cov_fn):
        c = np.asarray(cov_fn(np.arange(N)), dtype=float)
    else:
        c = np.asarray(cov_fn, dtype=float)
    if c.ndim != 1 or c.size < N:
        raise ParameterError(f"covariance must be defined on lags 0..{N - 1}")
    return c[:N]


def mean_removal_kernel(cov_fn: CovLike, N: int, method: str = "prefix") -> np.ndarray:
    """``K(n) = 1/(N (N-n)) sum_{i<N-n} sum_{j<N} C(|i-j|)`` for ``n = 0..N-1``."""
    c = _cov_table(cov_fn, N)
    n = np.arange(N)
    if method == "prefix":
        pref = np.cumsum(c)
        i = np.arange(N)
        row = pref[i] + pref[N - 1 - i] - c[0]  # sum_j C(|i-j|)
        csum = np.cumsum(row)
        return csum[N - 1 - n] / (N * (N - n))
    if method == "direct":
        toeplitz = c[np.abs(np.subtract.outer(np.arange(N), np.arange(N)))]
        return np.array([toeplitz[: N - k].sum() for k in n]) / (N * (N - n))
    raise ParameterError(f"unknown method {method!r}")


def expected_bias_exact(cov_fn: CovLike, N: int, n, method: str = "prefix"):
    """Exact ``E[C_hat(n)] = C(n) + K(0) - 2 K(n)`` for a stationary sequence.

    Parameters
    ----------
    cov_fn : callable or array_like
        True covariance at integer lags ``0..N-1``.
    N : int
        Window length in samples.
    n : int or array_like
        Lags in samples, ``0 <= n < N``.
    method : {"prefix", "direct"}
        ``"prefix"`` uses O(N) prefix sums; ``"direct"`` evaluates the double
        sums, O(N^2) per lag.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or np.any(n_arr >= N):
        raise ParameterError(f"lags must be in [0, {N - 1}]")
    c = _cov_table(cov_fn, N)
    if method == "direct":
        lags = np.atleast_1d(n_arr).astype(int)
        toeplitz = c[np.abs(np.subtract.outer(np.arange(N), np.arange(N)))]
        k0 = toeplitz.sum() / (N * N)
        kn = np.array([toeplitz[: N - k].sum() / (N * (N - k)) for k in lags])
        out = c[lags] + k0 - 2.0 * kn
        return float(out[0]) if n_arr.ndim == 0 else out
    K = mean_removal_kernel(c, N, "prefix")
    out = c[n_arr] + K[0] - 2.0 * K[n_arr]
    return float(out) if n_arr.ndim == 0 else out


def expected_cov_approx(tau, delta_t: float, lambda2: float):
    """First-order prediction ``lambda2 * (ln(exp(-3/2) dt / tau) - tau / dt)``.

    Valid for ``0 < tau < delta_t`` and an integral scale larger than the
    window; note that the true integral scale does not appear.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= 0) or np.any(tau_arr >= delta_t):
        raise EstimationError("expected_cov_approx needs 0 < tau < delta_t")
    out = lambda2 * (np.log(math.exp(-1.5) * delta_t / tau_arr) - tau_arr / delta_t)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def fit_log_decay(c: CovarianceEstimate, lag_lo: float, lag_hi: float) -> ScalingFit:
    """Least-squares fit of ``C(tau) = a + b ln(tau)`` on ``lag_lo <= tau <= lag_hi``.

    ``lambda2_hat = -b`` and ``T_hat = exp(a / lambda2_hat)`` is where the
    fitted line crosses zero.  Weights ``1/stderr^2`` are used when every
    standard error in range is positive.  A non-positive slope magnitude is
    reported with ``degenerate=True`` and ``T_hat=None``; it never raises.
    """
    lags = np.asarray(c.lags, dtype=float)
    eps = 1e-12 * max(abs(lag_lo), abs(lag_hi), 1.0)
    sel = (lags >= lag_lo - eps) & (lags <= lag_hi + eps) & (lags > 0)
    m = int(sel.sum())
    if m < 3:
        raise EstimationError(f"need at least 3 lags in [{lag_lo}, {lag_hi}], found {m}")
    x = np.log(lags[sel])
    y = np.asarray(c.values, dtype=float)[sel]
    X = np.column_stack([np.ones(m), x])

    se = None if c.stderr is None else np.asarray(c.stderr, dtype=float)[sel]
    weighted = se is not None and np.all(se > 0) and np.all(np.isfinite(se))
    w = 1.0 / se if weighted else np.ones(m)
    beta, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    resid = y - X @ beta
    xtwx_inv = np.linalg.inv((X * (w * w)[:, None]).T @ X)
    if weighted:
        param_cov = xtwx_inv
    else:
        s2 = float(resid @ resid) / (m - 2) if m > 2 else 0.0
        param_cov = s2 * xtwx_inv
    a, b = float(beta[0]), float(beta[1])
    lam2 = -b
    scale = max(float(np.max(np.abs(y))), 1e-300)
    degenerate = not (lam2 > 1e-12 * scale)
    T_hat = ln_T_se = None
    if not degenerate:
        ln_T = a / lam2
        if ln_T > 700:
            degenerate = True
        else:
            T_hat = math.exp(ln_T)
            grad = np.array([1.0 / lam2, a / lam2 ** 2])  # d(-a/b)/d(a, b)
            ln_T_se = float(math.sqrt(max(grad @ param_cov @ grad, 0.0)))
    return ScalingFit(
        lambda2_hat=lam2,
        T_hat=T_hat,
        lag_range=(float(lag_lo), float(lag_hi)),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        param_cov=param_cov,
        n_lags=m,
        intercept=a,
        degenerate=degenerate,
        ln_T_stderr=ln_T_se,
    )


def integral_scale_scan(
    s: MagnitudeSeries, delta_t_list: Sequence[float], lag_range: Callable | None = None
) -> IntegralScaleScan:
    """Apparent integral scale as a function of the window length.

    For every ``delta_t`` the windowed covariance is fitted on lags
    ``[2h, delta_t/4]`` (or ``lag_range(delta_t, h)`` if given).
    """
    rows, covs, fits = [], {}, {}
    for dt_win in delta_t_list:
        dt_win = float(dt_win)
        lo, hi = lag_range(dt_win, s.h) if lag_range else (2 * s.h, dt_win / 4)
        max_lag = int(math.floor(hi / s.h + 1e-9))
        cov = subsampled_covariance(s, dt_win, max_lag)
        fit = fit_log_decay(cov, lo, hi)
        T_se = fit.T_hat * fit.ln_T_stderr if fit.T_hat is not None else None
        rows.append(ScanRow(dt_win, cov.n_subsamples, fit.lambda2_hat, fit.T_hat,
                            fit.ln_T_stderr, T_se, fit.degenerate))
        covs[dt_win] = cov
        fits[dt_win] = fit
    return IntegralScaleScan(rows, covs, fits)


def scan_regression(scan: IntegralScaleScan) -> dict:
    """Regression of ``ln T_hat`` on ``ln delta_t`` over non-degenerate rows.

    Returns ``slope``, ``intercept`` and ``mean_offset``, the average of
    ``ln(T_hat / delta_t)`` (``-3/2`` for the aging model).
    """
    ok = [r for r in scan.rows if not r.degenerate]
    if len(ok) < 2:
        return {"slope": None, "intercept": None, "mean_offset": None, "n": len(ok)}
    x = np.log([r.delta_t for r in ok])
    y = np.log([r.T_hat for r in ok])
    slope, intercept = np.polyfit(x, y, 1)
    return {"slope": float(slope), "intercept": float(intercept),
            "mean_offset": float(np.mean(y - x)), "n": len(ok)}


# ---------------------------------------------------------------------------
# Structure functions
# ---------------------------------------------------------------------------

def _second_derivative(f: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.full(q.shape, np.nan)
    if q.size >= 3:
        dl = q[1:-1] - q[:-2]
        dr = q[2:] - q[1:-1]
        out[1:-1] = 2.0 * ((f[2:] - f[1:-1]) / dr - (f[1:-1] - f[:-2]) / dl) / (dl + dr)
    return out


def _as_level_arrays(x, dt):
    """Normalize the accepted inputs to ``(levels (reps, n+1), dt)``."""
    if isinstance(x, MeasurePath):
        return x.with_origin()[1][None, :], x.grid.dt
    if isinstance(x, MrwPath):
        return np.asarray(x.values)[None, :], x.grid.dt
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], (MeasurePath, MrwPath)):
        arrs = [_as_level_arrays(p, None) for p in x]
        dts = {a[1] for a in arrs}
        if len(dts) != 1:
            raise ParameterError("all paths must share the same dt")
        return np.vstack([a[0] for a in arrs]), dts.pop()
    arr = np.asarray(x, dtype=float)
    if dt is None:
        raise ParameterError("dt is required for raw arrays")
    return np.atleast_2d(arr), float(dt)


def structure_functions(x, q_list, tau_list, dt: float | None = None) -> StructureFunctions:
    """Empirical moments ``E|delta_tau Y|^q`` and their log-log slopes.

    Parameters
    ----------
    x : MeasurePath, MrwPath, sequence of them, or array_like
        Cumulative levels ``Y``.  Raw arrays have shape ``(n,)`` or
        ``(reps, n)`` and need ``dt``.  Increments are taken at every start
        position of every replica.
    q_list, tau_list : sequence of float
        Moment orders and lags (integer multiples of ``dt``).
    """
    levels, dt = _as_level_arrays(x, dt)
    q = np.asarray(q_list, dtype=float)
    taus = np.asarray(tau_list, dtype=float)
    if taus.size < 2:
        raise ParameterError("need at least two lags")
    steps = [_steps(t, dt) for t in taus]
    if max(steps) >= levels.shape[1]:
        raise ParameterError("largest lag exceeds the path length")
    moments = np.empty((q.size, taus.size))
    m_se = np.full((q.size, taus.size), np.nan)
    kurt = np.empty(taus.size)
    for j, k in enumerate(steps):
        inc = np.abs(levels[:, k:] - levels[:, :-k])
        per_rep = (inc[None, :, :] ** q[:, None, None]).mean(axis=2)  # (nq, reps)
        moments[:, j] = per_rep.mean(axis=1)
        if per_rep.shape[1] > 1:
            m_se[:, j] = per_rep.std(axis=1, ddof=1) / math.sqrt(per_rep.shape[1])
        m2 = np.mean(inc ** 2)
        kurt[j] = np.mean(inc ** 4) / m2 ** 2 if m2 > 0 else np.nan
    if not np.all(moments > 0):
        raise EstimationError("degenerate input: non-positive absolute moments")
    logm = np.log(moments)
    x_ = np.log(taus)
    X = np.column_stack([np.ones_like(x_), x_])
    beta, *_ = np.linalg.lstsq(X, logm.T, rcond=None)
    resid = logm.T - X @ beta
    dof = max(taus.size - 2, 1)
    s2 = (resid ** 2).sum(axis=0) / dof
    slope_var = s2 / ((x_ - x_.mean()) ** 2).sum()
    zeta_hat = beta[1]
    return StructureFunctions(
        q=q,
        tau=taus,
        moments=moments,
        zeta_hat=zeta_hat,
        zeta_stderr=np.sqrt(slope_var),
        c_q=_second_derivative(logm[:, 0], q),
        zeta_curvature=_second_derivative(zeta_hat, q),
        kurtosis=kurt,
        moment_stderr=m_se,
    )


@dataclass(frozen=True)
class ConcavityReport:
    q: np.ndarray  # interior orders
    second_differences: np.ndarray
    tolerance: np.ndarray
    violations: list

    @property
    def concave(self) -> bool:
        return not self.violations


def concavity_check(sf: StructureFunctions, n_sigma: float = 3.0) -> ConcavityReport:
    """Second differences of ``zeta_hat``; positive ones beyond the fit error are violations.

    On a non-uniform ``q`` grid the divided second difference is rescaled by
    ``h_left * h_right`` so that a uniform grid gives the plain second
    difference.
    """
    z = np.asarray(sf.zeta_hat, dtype=float)
    q = np.asarray(sf.q, dtype=float)
    if z.size < 3:
        raise ParameterError("need at least 3 moment orders")
    se = np.zeros_like(z) if sf.zeta_stderr is None else np.asarray(sf.zeta_stderr, dtype=float)
    hl = q[1:-1] - q[:-2]
    hr = q[2:] - q[1:-1]
    a = 2.0 * hr / (hl + hr)  # weight of the left neighbour
    c = 2.0 * hl / (hl + hr)  # weight of the right neighbour
    d2 = a * z[:-2] - 2.0 * z[1:-1] + c * z[2:]
    tol = n_sigma * np.sqrt((a * se[:-2]) ** 2 + 4 * se[1:-1] ** 2 + (c * se[2:]) ** 2)
    tol = tol + 1e-12 * max(1.0, float(np.max(np.abs(z))))
    q_mid = q[1:-1]
    return ConcavityReport(q_mid, d2, tol, [float(v) for v in q_mid[d2 > tol]])


def integral_scale_bound(sf: StructureFunctions) -> float:
    """Largest scale compatible with the fitted multiscaling.

    ``tau_min * min_q exp(-c_q / zeta''(q))`` over the orders where
    ``zeta'' < 0``; ``inf`` when the curvature is nowhere negative.  The
    result is in the time unit of ``sf.tau`` (``c_q`` is measured at the
    smallest lag, which serves as the unit scale).
    """
    curv = np.asarray(sf.zeta_curvature, dtype=float)
    cq = np.asarray(sf.c_q, dtype=float)
    ok = np.isfinite(curv) & np.isfinite(cq) & (curv < 0)
    if not np.any(ok):
        return math.inf
    return float(np.min(sf.tau.min() * np.exp(-cq[ok] / curv[ok])))
