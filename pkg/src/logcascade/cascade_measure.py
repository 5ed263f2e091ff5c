"""
Cascade measures and multifractal random walks.

The measure is the running integral of ``sigma2 * exp(omega)`` over a field
path, so that ``E[M(t)] = sigma2 * t``; the walk is a Brownian motion
evaluated at the measure, ``X(t) = B[M(t)]``.

This module also carries the closed-form moment results of the log-normal
model (the parabolic scaling function, second moments of the aging measure by
quadrature) and the coupled-cutoff convergence diagnostic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from ._random import SeedLike, as_seed_sequence, seed_record
from .cone import sample_coupled_cone
from .errors import MeasureOverflowError, ParameterError, QuadratureError
from .gaussian_field import CascadeParams, GaussianLogVolPath, TimeGrid

_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class MeasurePath:
    """Cascade measure on a grid.

    ``increments[i]`` is the mass of cell ``[t_i, t_i + dt)`` and
    ``cumulative[i]`` is ``M(t_i + dt)``, the measure accumulated since the
    grid origin up to the right end of cell ``i``.
    """

    grid: TimeGrid
    increments: np.ndarray
    cumulative: np.ndarray
    params: CascadeParams

    @property
    def times(self) -> np.ndarray:
        """Right cell ends, the times at which ``cumulative`` is observed."""
        return self.grid.times + self.grid.dt

    def with_origin(self) -> tuple[np.ndarray, np.ndarray]:
        """``(t, M)`` including the origin point ``M(t0) = 0``."""
        t = np.concatenate([[self.grid.t0], self.times])
        return t, np.concatenate([[0.0], self.cumulative])


@dataclass(frozen=True)
class MrwPath:
    """Multifractal random walk ``X = B[M]`` observed at ``t0 + i*dt``, ``i = 0..n``."""

    grid: TimeGrid
    values: np.ndarray
    source: MeasurePath
    seed: dict = field(default_factory=dict)
    hurst: float = 0.5

    @property
    def times(self) -> np.ndarray:
        return self.grid.t0 + self.grid.dt * np.arange(self.grid.n + 1)


@dataclass(frozen=True)
class SelfSimFactor:
    """Law of the Gaussian factor ``Omega_r`` relating scales ``t`` and ``r t``."""

    ratio: float
    mean: float
    variance: float


@dataclass(frozen=True)
class MomentTable:
    """Moments ``E[Y(tau)^q]`` tabulated on orders ``q`` and durations ``tau``."""

    q: np.ndarray
    tau: np.ndarray
    values: np.ndarray  # shape (len(q), len(tau))
    kind: str  # "exact" or "monte_carlo"
    stderr: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

def measure_increments(omega, dt: float, sigma2: float = 1.0) -> np.ndarray:
    """Cell masses ``sigma2 * exp(omega) * dt`` (left-endpoint rule), any shape."""
    omega = np.asarray(omega, dtype=float)
    bad = np.flatnonzero(np.abs(omega.reshape(-1)) > _EXP_LIMIT)
    if bad.size:
        idx = np.unravel_index(bad[0], omega.shape)
        raise MeasureOverflowError(
            f"|omega| exceeds {_EXP_LIMIT:g} at index {tuple(int(i) for i in idx)}"
            f" (value {omega[idx]:.6g}); exp would overflow"
        )
    return sigma2 * np.exp(omega) * dt


def build_measure(path: GaussianLogVolPath) -> MeasurePath:
    """Measure generated by a field path.

    Examples
    --------
    >>> from logcascade.gaussian_field import CascadeParams, GaussianLogVolPath, TimeGrid
    >>> grid = TimeGrid(0.0, 1.0, 4)
    >>> flat = GaussianLogVolPath(grid, [0.0] * 4, "nonstationary", CascadeParams(0.0))
    >>> build_measure(flat).cumulative
    array([1., 2., 3., 4.])
    """
    inc = measure_increments(path.values, path.grid.dt, path.params.sigma2)
    return MeasurePath(path.grid, inc, np.cumsum(inc), path.params)


def build_mrw(m: MeasurePath, seed: SeedLike = None) -> MrwPath:
    """Brownian motion subordinated to ``m``.

    Conditionally on the measure, the walk increments are independent centered
    Gaussians with variance equal to the cell masses.
    """
    ss = as_seed_sequence(seed)
    z = np.random.default_rng(ss).standard_normal(m.grid.n)
    x = np.concatenate([[0.0], np.cumsum(np.sqrt(m.increments) * z)])
    return MrwPath(m.grid, x, m, seed_record(ss))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def zeta(q, lambda2: float):
    """Parabolic scaling exponent ``q (1 + lambda2/2) - lambda2 q^2 / 2``."""
    q = np.asarray(q, dtype=float)
    out = q * (1.0 + lambda2 / 2.0) - lambda2 * q * q / 2.0
    return float(out) if out.ndim == 0 else out


def self_similarity_factor(r: float, lambda2: float) -> SelfSimFactor:
    """Mean ``lambda2/2 ln r`` and variance ``-lambda2 ln r`` of ``Omega_r``."""
    if not 0 < r <= 1:
        raise ParameterError("ratio r must lie in (0, 1]")
    lr = math.log(r)
    return SelfSimFactor(ratio=r, mean=0.5 * lambda2 * lr, variance=-lambda2 * lr)


def _check_lambda2(lambda2: float):
    if lambda2 < 0:
        raise ParameterError("lambda2 must be >= 0")
    if lambda2 >= 1:
        raise ParameterError(
            f"second moments diverge for lambda2 >= 1 (got {lambda2})"
        )


def _pair_integral(shift: float, width: float, lambda2: float, tol: float) -> float:
    """``int_0^w int_0^w ((shift + max(u,v)) / |u-v|)^lambda2 du dv``.

    The integrand is symmetric, so the lower triangle ``v < u`` is doubled.
    Along the diagonal the substitution ``w = (u - v)^(1 - lambda2)`` turns the
    power singularity into a bounded integrand.
    """
    a = 1.0 - lambda2
    # d = u - v = w**(1/a); (x/d)^lambda2 dd = x^lambda2 / a dw
    def integrand(w, u):
        return (shift + u) ** lambda2 / a

    val, err = integrate.dblquad(
        integrand, 0.0, width, 0.0, lambda u: u ** a, epsabs=tol, epsrel=0.0
    )
    if not np.isfinite(val) or err > 10 * tol:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}")
    return 2.0 * val


def exact_moment2(tau: float, lambda2: float, tol: float = 1e-8) -> float:
    """``E[M(tau)^2] = C2 * tau^2`` for the aging measure (``sigma2 = 1``).

    ``C2`` is the double integral of ``(max(u,v)/|u-v|)^lambda2`` over the
    unit square, computed by adaptive quadrature.
    """
    _check_lambda2(lambda2)
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    return _pair_integral(0.0, 1.0, lambda2, tol) * tau * tau


def exact_increment_moment2(t: float, tau: float, lambda2: float, tol: float = 1e-8) -> float:
    """``E[(M(t+tau) - M(t))^2]`` for the aging measure (``sigma2 = 1``).

    Evaluated as ``t^2`` times the integral of ``((1 + max(u,v)) / |u-v|)^lambda2``
    over ``[0, tau/t]^2``; for ``t = 0`` this is :func:`exact_moment2`.
    """
    _check_lambda2(lambda2)
    if t < 0 or tau <= 0:
        raise ParameterError("need t >= 0 and tau > 0")
    if t == 0:
        return exact_moment2(tau, lambda2, tol)
    x = tau / t
    # scaled tolerance keeps the absolute accuracy of the final value
    return t * t * _pair_integral(1.0, x, lambda2, tol / (t * t))


def increment_moment2_prefactor(t: float, lambda2: float) -> float:
    """Leading constant ``C2(t)`` in ``E[(M(t+tau)-M(t))^2] ~ C2(t) tau^(2-lambda2)``.

    ``C2(t) = 2 t^lambda2 / ((1 - lambda2)(2 - lambda2))``, valid for ``tau << t``.
    """
    _check_lambda2(lambda2)
    return 2.0 * t ** lambda2 / ((1.0 - lambda2) * (2.0 - lambda2))


def exact_moment_table(taus: Sequence[float], lambda2: float, t: float = 0.0) -> MomentTable:
    """Exact second moments of measure increments starting at ``t``."""
    taus = np.asarray(taus, dtype=float)
    vals = np.array([[exact_increment_moment2(t, x, lambda2) for x in taus]])
    return MomentTable(q=np.array([2.0]), tau=taus, values=vals, kind="exact")


def monte_carlo_moment_table(samples, taus, q) -> MomentTable:
    """Moments of ``|samples|`` per column.

    Parameters
    ----------
    samples : array_like, shape (reps, len(taus))
        One value of the quantity of interest per replica and duration.
    """
    s = np.abs(np.asarray(samples, dtype=float))
    q = np.asarray(q, dtype=float)
    pw = s[None, :, :] ** q[:, None, None]
    reps = s.shape[0]
    stderr = pw.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else None
    return MomentTable(q=q, tau=np.asarray(taus, dtype=float), values=pw.mean(axis=1),
                       kind="monte_carlo", stderr=stderr)


# ---------------------------------------------------------------------------
# Convergence diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceTable:
    """Mean-square differences of measures with cutoffs ``ell`` and ``2*ell``."""

    horizon: float
    cutoffs: np.ndarray  # decreasing
    fine: np.ndarray  # finer cutoff of each pair
    msd: np.ndarray  # E[(M_fine - M_coarse)^2]
    stderr: np.ndarray
    ratios: np.ndarray  # msd[i] / msd[i+1], coarse pair over the next finer one
    reps: int
    seed: dict = field(default_factory=dict)


def convergence_diagnostic(
    t: float,
    ell_list: Sequence[float],
    reps: int,
    seed: SeedLike,
    lambda2: float,
    dt: float | None = None,
    scale_resolution: int = 8,
    sigma2: float = 1.0,
) -> ConvergenceTable:
    """Monte-Carlo estimate of ``E[(M_ell(t) - M_2ell(t))^2]`` for successive cutoffs.

    The measures for all cutoffs of one replica are built from the same
    white noise (layers above a cutoff are shared), so their difference is
    meaningful pathwise.  The ratio between consecutive pairs approaches
    ``2^(1 - lambda2)`` as the cutoffs shrink.

    Parameters
    ----------
    t : float
        Horizon; ``M(t)`` integrates the density over ``[0, t)``.
    ell_list : sequence of float
        Strictly decreasing cutoffs, each half of the previous one.
    dt : float, optional
        Integration step, by default ``min(ell_list) / 2``.
    """
    ells = np.asarray(ell_list, dtype=float)
    if ells.size < 2:
        raise ParameterError("need at least two cutoffs")
    if np.any(np.diff(ells) >= 0):
        raise ParameterError("cutoffs must be strictly decreasing")
    if not np.allclose(ells[:-1] / ells[1:], 2.0, rtol=1e-9):
        raise ParameterError("successive cutoffs must differ by a factor of 2")
    if reps < 100:
        warnings.warn(f"reps={reps} is small; mean-square differences will be noisy",
                      RuntimeWarning, stacklevel=2)
    dt = float(ells.min() / 2 if dt is None else dt)
    n = int(round(t / dt))
    if n < 1 or not math.isclose(n * dt, t, rel_tol=1e-9):
        raise ParameterError("horizon must be a positive multiple of dt")
    grid = TimeGrid(0.0, dt, n)
    p = CascadeParams(lambda2=lambda2, cutoff=float(ells.min()), sigma2=sigma2)
    ss = as_seed_sequence(seed)
    fields = sample_coupled_cone("nonstationary", grid, p, list(ells), reps, ss, scale_resolution)
    masses = (sigma2 * dt) * np.exp(fields).sum(axis=2)  # (n_ells, reps)
    diff2 = (masses[1:] - masses[:-1]) ** 2
    msd = diff2.mean(axis=1)
    stderr = diff2.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(msd)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = msd[:-1] / msd[1:]
    return ConvergenceTable(
        horizon=float(t), cutoffs=ells, fine=ells[1:], msd=msd, stderr=stderr,
        ratios=ratios, reps=int(reps), seed=seed_record(ss),
    )
