"""
Log-volatility Gaussian fields of log-normal continuous cascades.

Two models share the same machinery:

``stationary``
    The classical cascade field :math:`\\omega_{\\ell,T}(t)` with integral
    scale :math:`T`.  Its covariance is :math:`\\lambda^2\\ln(T/\\tau)` for
    :math:`\\ell \\le \\tau \\le T`, linearised below the cutoff and zero
    beyond :math:`T`.

``nonstationary``
    The aging field :math:`\\omega_\\ell(t)` obtained when the integral scale
    at time :math:`t` is :math:`t` itself.  The covariance of
    :math:`\\omega_\\ell(t_1)` and :math:`\\omega_\\ell(t_2)` is the stationary
    kernel evaluated with :math:`T = \\max(t_1, t_2)`.  The field is
    identically zero before the cutoff (``t < ell``).

Both fields are given the mean that makes :math:`E[e^{\\omega(t)}] = 1`.

Sampling
--------
:func:`sample_path` draws exact Gaussian samples on a uniform grid by a
Cholesky factorization of the closed-form covariance matrix.  Factors are
cached, so Monte-Carlo replicas on the same grid cost :math:`O(n^2)` each.
Dense synthesis is limited to :data:`DENSE_MAX_POINTS` points; longer paths are
built from independent blocks by :func:`sample_path_blocks`, which keeps the
exact joint law inside every block and drops the correlation between blocks.

An independent sampler based on a discretization of the time-scale half-plane
lives in :mod:`logcascade.cone`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal, Optional

import numpy as np

from ._random import SeedLike, as_seed_sequence, replica_seeds, seed_record
from .errors import ParameterError, SynthesisError

Kind = Literal["stationary", "nonstationary"]
KINDS = ("stationary", "nonstationary")

#: Largest grid accepted by the dense sampler.
DENSE_MAX_POINTS = 4096

_JITTER_START = 1e-12
_JITTER_STOP = 1e-6


@dataclass(frozen=True)
class CascadeParams:
    """Parameters of a log-normal cascade.

    Parameters
    ----------
    lambda2 : float
        Intermittency coefficient, ``lambda2 >= 0``.  The field is defined
        for any value; second moments of the measure need ``lambda2 < 1``.
    cutoff : float
        Small scale :math:`\\ell` of the field.
    integral_scale : float or None
        Integral scale :math:`T`.  ``None`` selects the non-stationary model.
    sigma2 : float
        Variance scale, ``E[M(t)] = sigma2 * t``.
    """

    lambda2: float
    cutoff: float = 1.0
    integral_scale: Optional[float] = None
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("lambda2", "cutoff", "sigma2"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.lambda2 < 0:
            raise ParameterError(f"lambda2 must be >= 0, got {self.lambda2}")
        if self.cutoff <= 0:
            raise ParameterError(f"cutoff must be > 0, got {self.cutoff}")
        if self.sigma2 <= 0:
            raise ParameterError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.integral_scale is not None:
            if not np.isfinite(self.integral_scale) or self.integral_scale <= 0:
                raise ParameterError(
                    f"integral_scale must be a positive number, got {self.integral_scale}"
                )
            if self.integral_scale < self.cutoff:
                raise ParameterError(
                    f"integral_scale ({self.integral_scale}) must be >= cutoff ({self.cutoff})"
                )

    @property
    def stationary(self) -> bool:
        return self.integral_scale is not None

    @property
    def kind(self) -> Kind:
        return "stationary" if self.stationary else "nonstationary"

    def with_(self, **changes) -> "CascadeParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + i * dt`` for ``i = 0 .. n-1``."""

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.t0) or self.t0 < 0:
            raise ParameterError(f"t0 must be >= 0, got {self.t0}")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        """Right end of the last cell, ``t0 + n * dt``."""
        return self.t0 + self.n * self.dt


@dataclass(frozen=True)
class GaussianLogVolPath:
    """One realization of the log-volatility field on a grid."""

    grid: TimeGrid
    values: np.ndarray
    model_kind: Kind
    params: CascadeParams
    seed: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ParameterError(
                f"expected {self.grid.n} values, got array of shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("path values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def check_kind(kind: str, p: CascadeParams) -> Kind:
    if kind not in KINDS:
        raise ParameterError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if kind == "stationary" and p.integral_scale is None:
        raise ParameterError("the stationary model requires an integral_scale")
    return kind  # type: ignore[return-value]


def _scalar_or_array(x: np.ndarray, like) -> float | np.ndarray:
    return float(x) if np.ndim(like) == 0 else x


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def cov_stationary(tau, p: CascadeParams):
    """Covariance of the stationary field at lag ``tau``.

    Parameters
    ----------
    tau : float or array_like
        Non-negative lags.
    p : CascadeParams
        Must carry an ``integral_scale``.

    Returns
    -------
    float or ndarray
        ``lambda2 * (ln(T/ell) + 1 - tau/ell)`` for ``tau < ell``,
        ``lambda2 * ln(T/tau)`` for ``ell <= tau <= T`` and 0 beyond ``T``.
    """
    if p.integral_scale is None:
        raise ParameterError("cov_stationary requires an integral_scale")
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0) or np.any(np.isnan(tau_arr)):
        raise ParameterError("lags must be >= 0")
    T, ell, lam2 = p.integral_scale, p.cutoff, p.lambda2
    safe = np.where(tau_arr > 0, tau_arr, ell)
    out = np.where(
        tau_arr < ell,
        lam2 * (np.log(T / ell) + 1.0 - tau_arr / ell),
        lam2 * np.log(T / safe),
    )
    out = np.where(tau_arr > T, 0.0, out)
    return _scalar_or_array(out, tau)


def mean_stationary(p: CascadeParams) -> float:
    """Constant mean ``-lambda2/2 * (1 + ln(T/ell))`` of the stationary field."""
    if p.integral_scale is None:
        raise ParameterError("mean_stationary requires an integral_scale")
    return -0.5 * p.lambda2 * (1.0 + math.log(p.integral_scale / p.cutoff))


def cov_nonstationary(t1, t2, p: CascadeParams):
    """Covariance of the aging field at times ``t1`` and ``t2``.

    With ``hi = max(t1, t2)`` and ``tau = |t2 - t1|`` the value is the
    stationary kernel with integral scale ``hi``.  It is zero when either time
    is below the cutoff, where the field vanishes.
    """
    a = np.asarray(t1, dtype=float)
    b = np.asarray(t2, dtype=float)
    if np.any(a < 0) or np.any(b < 0) or np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise ParameterError("times must be >= 0")
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    tau = hi - lo
    ell, lam2 = p.cutoff, p.lambda2
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_hi = np.where(hi > 0, hi, ell)
        safe_tau = np.where(tau > 0, tau, ell)
        out = np.where(
            tau < ell,
            lam2 * (np.log(safe_hi / ell) + 1.0 - tau / ell),
            lam2 * np.log(safe_hi / safe_tau),
        )
    out = np.where(lo < ell, 0.0, out)
    if np.ndim(t1) == 0 and np.ndim(t2) == 0:
        return float(out)
    return out


def mean_nonstationary(t, p: CascadeParams):
    """Mean ``-Var[omega(t)]/2`` of the aging field; 0 below the cutoff."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("times must be >= 0")
    ell = p.cutoff
    safe = np.where(t_arr >= ell, t_arr, ell)
    out = np.where(t_arr >= ell, -0.5 * p.lambda2 * (1.0 + np.log(safe / ell)), 0.0)
    return _scalar_or_array(out, t)


def variance_nonstationary(t, p: CascadeParams):
    """``lambda2 * (1 + ln(t/ell))`` for ``t >= ell``, else 0."""
    return -2.0 * mean_nonstationary(t, p)


def increment_cov(h, tau, p: CascadeParams):
    """Covariance ``lambda2 * ln(1 - h^2/tau^2)`` of aging-field increments.

    Valid for ``tau > h``; the increments of span ``h`` are anti-correlated at
    every lag.
    """
    h_arr = np.asarray(h, dtype=float)
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= h_arr):
        raise ParameterError("increment_cov requires tau > h")
    if np.any(h_arr <= 0):
        raise ParameterError("increment span h must be > 0")
    out = p.lambda2 * np.log1p(-(h_arr / tau_arr) ** 2)
    return _scalar_or_array(out, tau if np.ndim(tau) else h)


# ---------------------------------------------------------------------------
# Dense synthesis
# ---------------------------------------------------------------------------

def covariance_matrix(kind: str, times, p: CascadeParams) -> np.ndarray:
    """Covariance matrix of the field at ``times``."""
    kind = check_kind(kind, p)
    t = np.asarray(times, dtype=float)
    if kind == "stationary":
        return cov_stationary(np.abs(t[:, None] - t[None, :]), p)
    return cov_nonstationary(t[:, None], t[None, :], p)


def mean_vector(kind: str, times, p: CascadeParams) -> np.ndarray:
    kind = check_kind(kind, p)
    t = np.asarray(times, dtype=float)
    if kind == "stationary":
        return np.full(t.shape, mean_stationary(p))
    return np.asarray(mean_nonstationary(t, p), dtype=float)


@dataclass(frozen=True)
class _Factor:
    active: np.ndarray  # indices of points with non-zero variance
    chol: np.ndarray  # lower factor of the active block
    mean: np.ndarray  # full mean vector
    jitter: float


def factorize(kind: str, grid: TimeGrid, p: CascadeParams) -> _Factor:
    """Cholesky factor of the grid covariance, with diagonal jitter escalation.

    Points with zero variance (the aging field below its cutoff, or any point
    when ``lambda2 == 0``) are removed before factorization.  The factor is
    cached on ``(kind, grid, p)``.
    """
    kind = check_kind(kind, p)
    return _factorize_cached(kind, grid, p)


@lru_cache(maxsize=16)
def _factorize_cached(kind: str, grid: TimeGrid, p: CascadeParams) -> _Factor:
    times = grid.times
    mean = mean_vector(kind, times, p)
    cov = covariance_matrix(kind, times, p)
    active = np.flatnonzero(np.diag(cov) > 0)
    if active.size == 0:
        return _Factor(active, np.zeros((0, 0)), mean, 0.0)
    sub = cov[np.ix_(active, active)]
    scale = np.trace(sub) / active.size
    jitter = _JITTER_START
    while jitter <= _JITTER_STOP * (1 + 1e-9):
        try:
            chol = np.linalg.cholesky(sub + jitter * scale * np.eye(active.size))
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        chol.setflags(write=False)
        return _Factor(active, chol, mean, jitter * scale)
    eig = np.linalg.eigvalsh(sub)
    raise SynthesisError(
        f"covariance matrix of {active.size} points is not positive definite after "
        f"jitter up to {_JITTER_STOP:g}*trace/n: eigenvalues in [{eig[0]:.3e}, {eig[-1]:.3e}], "
        f"condition estimate {abs(eig[-1] / eig[0]) if eig[0] != 0 else np.inf:.3e}"
    )


def _check_dense(grid: TimeGrid):
    if grid.n > DENSE_MAX_POINTS:
        raise ParameterError(
            f"dense synthesis is limited to {DENSE_MAX_POINTS} points (got {grid.n}); "
            "use sample_path_blocks or the cone sampler"
        )


def _draw(factor: _Factor, n: int, ss: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(ss)
    z = rng.standard_normal(factor.active.size)
    out = factor.mean.copy()
    if factor.active.size:
        out[factor.active] += factor.chol @ z
    return out


def sample_path(
    kind: str, grid: TimeGrid, p: CascadeParams, seed: SeedLike = None
) -> GaussianLogVolPath:
    """Exact Gaussian sample of the field on ``grid``.

    Examples
    --------
    >>> p = CascadeParams(lambda2=0.02, cutoff=1.0)
    >>> path = sample_path("nonstationary", TimeGrid(0.0, 1.0, 8), p, seed=7)
    >>> path.values.shape
    (8,)
    """
    kind = check_kind(kind, p)
    _check_dense(grid)
    ss = as_seed_sequence(seed)
    factor = _factorize_cached(kind, grid, p)
    values = _draw(factor, grid.n, ss)
    return GaussianLogVolPath(grid, values, kind, p, seed_record(ss))


def sample_paths(
    kind: str, grid: TimeGrid, p: CascadeParams, reps: int, seed: SeedLike = None
) -> np.ndarray:
    """``reps`` independent samples as an array of shape ``(reps, grid.n)``.

    Row ``i`` equals ``sample_path(kind, grid, p, replica_seeds(seed, reps)[i]).values``.
    """
    kind = check_kind(kind, p)
    _check_dense(grid)
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    factor = _factorize_cached(kind, grid, p)
    seeds = replica_seeds(seed, reps)
    m = factor.active.size
    out = np.broadcast_to(factor.mean, (reps, grid.n)).copy()
    if m:
        z = np.empty((reps, m))
        for i, ss in enumerate(seeds):
            z[i] = np.random.default_rng(ss).standard_normal(m)
        out[:, factor.active] += z @ factor.chol.T
    return out


def sample_path_blocks(
    kind: str,
    grid: TimeGrid,
    p: CascadeParams,
    seed: SeedLike = None,
    block_len: int = DENSE_MAX_POINTS,
) -> GaussianLogVolPath:
    """Long path made of independent, exactly sampled consecutive blocks.

    Inside each block of ``block_len`` points the joint law is exact; values
    in different blocks are independent.  Estimators that only combine
    points within one block (lags much smaller than ``block_len``, windows
    aligned on block boundaries) are unaffected by the approximation.
    """
    kind = check_kind(kind, p)
    if not 1 <= block_len <= DENSE_MAX_POINTS:
        raise ParameterError(f"block_len must be in [1, {DENSE_MAX_POINTS}]")
    ss = as_seed_sequence(seed)
    n_blocks = -(-grid.n // block_len)
    seeds = replica_seeds(ss, n_blocks)
    values = np.empty(grid.n)
    for b in range(n_blocks):
        start = b * block_len
        m = min(block_len, grid.n - start)
        sub = TimeGrid(grid.t0 + start * grid.dt, grid.dt, m)
        values[start:start + m] = _draw(_factorize_cached(kind, sub, p), m, seeds[b])
    rec = seed_record(ss)
    rec["block_len"] = int(block_len)
    return GaussianLogVolPath(grid, values, kind, p, rec)
