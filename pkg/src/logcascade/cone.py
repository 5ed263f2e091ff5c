"""
Cone sampler: the field as a sum of white-noise masses over the time-scale plane.

The field at time ``t`` is the integral of a Gaussian white noise of density
``lambda2 * s**-2 du ds`` over the cone

* stationary: ``s >= ell`` and ``t - min(s, T) <= u <= t``
* non-stationary: ``s >= ell`` and ``max(0, t - s) <= u <= t`` (empty if ``t < ell``)

The scale axis is cut into logarithmic layers ``s_k = ell * 2**(k / resolution)``.
Inside a layer the cone is replaced by a strip of constant time extent
``w_k = ln(s_{k+1}/s_k) / (1/s_k - 1/s_{k+1})``, the extent that preserves the
layer's contribution to the variance.  Along time the strip is integrated
exactly: the layer noise is a Brownian motion ``B_k`` with diffusion
``lambda2 * (1/s_k - 1/s_{k+1})``, sampled at every window end point, and the
layer contributes ``B_k(t) - B_k(t - w_k)``.  Scales above the last boundary
form one final layer whose strip is ``[0, t]`` (non-stationary) or
``[t - T, t]`` (stationary).

With this scheme the covariance of two points at lag ``tau`` is exact except
for the single layer that contains ``tau``; the error is at most
``lambda2 * ln(2) / resolution``.  The mean is set to ``-Var/2`` of the
discretized field so ``E[exp(omega)] = 1`` holds exactly.

Because all layers above a cutoff are shared, fields with several cutoffs can
be drawn from the same noise (see :func:`sample_coupled_cone`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._random import SeedLike, as_seed_sequence, replica_seeds, seed_record
from .errors import ParameterError, SynthesisError
from .gaussian_field import CascadeParams, GaussianLogVolPath, TimeGrid, check_kind

#: Resolutions below this value trigger a :class:`ConeResolutionWarning`.
MIN_SCALE_RESOLUTION = 4
#: Upper bound on the number of stored Brownian sample points.
MAX_CONE_POINTS = 50_000_000


class ConeResolutionWarning(UserWarning):
    """The scale discretization is coarser than recommended."""


def in_cone(u, s, t, p: CascadeParams, kind: str | None = None):
    """True where the time-scale point ``(u, s)`` belongs to the cone of ``t``."""
    kind = check_kind(kind or p.kind, p)
    u, s, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (u, s, t)))
    ell = p.cutoff
    if kind == "stationary":
        return (s >= ell) & (t - np.minimum(s, p.integral_scale) <= u) & (u <= t)
    return (t >= ell) & (s >= ell) & (np.maximum(0.0, t - s) <= u) & (u <= t)


@dataclass(frozen=True)
class ConePlan:
    """Precomputed layer geometry and sampling indices for one grid."""

    kind: str
    grid: TimeGrid
    params: CascadeParams
    scale_resolution: int
    layer_lo: np.ndarray  # lower scale edge of each layer
    layer_hi: np.ndarray  # upper scale edge, inf for the last layer
    density: np.ndarray  # lambda2 * (1/lo - 1/hi)
    window_lo: np.ndarray  # (K, n) start of the time window of each point
    hi_idx: np.ndarray  # (K, n) positions of t in the cumulative noise vector
    lo_idx: np.ndarray  # (K, n) positions of window starts
    std: np.ndarray  # (total,) standard deviations of the noise increments

    @property
    def n_layers(self) -> int:
        return self.layer_lo.size

    def layer_variance(self) -> np.ndarray:
        """``(K, n)`` variance contributed by each layer at each grid time."""
        t = self.grid.times
        return self.density[:, None] * (t[None, :] - self.window_lo)

    def first_layer(self, cutoff: float) -> int:
        """Index of the layer whose lower edge equals ``cutoff``."""
        hits = np.flatnonzero(np.isclose(self.layer_lo, cutoff, rtol=1e-9, atol=0.0))
        if hits.size == 0:
            raise ParameterError(
                f"cutoff {cutoff} is not a layer boundary of this plan; cutoffs must be "
                f"ell * 2**(k/{self.scale_resolution})"
            )
        return int(hits[0])

    def variance(self, cutoff: float | None = None) -> np.ndarray:
        cutoff = self.params.cutoff if cutoff is None else cutoff
        var = self.layer_variance()[self.first_layer(cutoff):].sum(axis=0)
        if self.kind == "nonstationary":
            var = np.where(self.grid.times >= cutoff, var, 0.0)
        return var

    def covariance(self, cutoff: float | None = None) -> np.ndarray:
        """Exact covariance matrix of the discretized field, O(K n^2)."""
        cutoff = self.params.cutoff if cutoff is None else cutoff
        k0 = self.first_layer(cutoff)
        t = self.grid.times
        cov = np.zeros((t.size, t.size))
        for k in range(k0, self.n_layers):
            lo = self.window_lo[k]
            overlap = np.minimum(t[:, None], t[None, :]) - np.maximum(lo[:, None], lo[None, :])
            cov += self.density[k] * np.clip(overlap, 0.0, None)
        if self.kind == "nonstationary":
            alive = t >= cutoff
            cov *= alive[:, None] & alive[None, :]
        return cov


def _layer_edges(kind: str, p: CascadeParams, t_max: float, ell: float, res: int):
    k = 0
    edges = [ell]
    top = p.integral_scale if kind == "stationary" else max(t_max, ell)
    while True:
        k += 1
        nxt = ell * 2.0 ** (k / res)
        if kind == "stationary":
            if nxt >= top * (1 - 1e-12):
                if edges[-1] < top:
                    edges.append(top)
                break
            edges.append(nxt)
        else:
            if edges[-1] >= top:
                break
            edges.append(nxt)
    return np.asarray(edges)


def build_plan(
    kind: str,
    grid: TimeGrid,
    p: CascadeParams,
    scale_resolution: int = 8,
    min_cutoff: float | None = None,
) -> ConePlan:
    """Geometry of the layered cone for ``grid``.

    ``min_cutoff`` (default ``p.cutoff``) is the smallest scale resolved; larger
    cutoffs of the form ``min_cutoff * 2**(k/scale_resolution)`` can then be
    extracted from the same noise.
    """
    kind = check_kind(kind, p)
    if int(scale_resolution) != scale_resolution or scale_resolution < 1:
        raise ParameterError("scale_resolution must be a positive integer")
    if scale_resolution < MIN_SCALE_RESOLUTION:
        warnings.warn(
            f"scale_resolution={scale_resolution} is below {MIN_SCALE_RESOLUTION} "
            "subdivisions per octave; covariance errors up to "
            f"{math.log(2) / scale_resolution:.3f}*lambda2 are possible",
            ConeResolutionWarning,
            stacklevel=2,
        )
    return _build_plan(kind, grid, p, int(scale_resolution),
                       float(p.cutoff if min_cutoff is None else min_cutoff))


@lru_cache(maxsize=8)
def _build_plan(kind, grid, p, res, ell) -> ConePlan:
    if ell <= 0:
        raise ParameterError("min_cutoff must be > 0")
    t = grid.times
    edges = _layer_edges(kind, p, float(t[-1]), ell, res)
    lo_edges = edges
    hi_edges = np.append(edges[1:], np.inf)
    with np.errstate(divide="ignore"):
        density = p.lambda2 * (1.0 / lo_edges - 1.0 / hi_edges)
    finite = np.isfinite(hi_edges)
    width = np.empty_like(lo_edges)
    width[finite] = np.log(hi_edges[finite] / lo_edges[finite]) / (
        1.0 / lo_edges[finite] - 1.0 / hi_edges[finite]
    )
    if kind == "stationary":
        width[~finite] = p.integral_scale
        window_lo = t[None, :] - width[:, None]
    else:
        width[~finite] = np.inf
        window_lo = np.maximum(0.0, t[None, :] - width[:, None])

    n_layers = lo_edges.size
    est_total = n_layers * 2 * t.size
    if est_total > MAX_CONE_POINTS:
        raise SynthesisError(
            f"cone plan needs about {est_total} noise points "
            f"({n_layers} layers x {t.size} times), above the cap of {MAX_CONE_POINTS}"
        )
    hi_idx = np.empty((n_layers, t.size), dtype=np.int64)
    lo_idx = np.empty((n_layers, t.size), dtype=np.int64)
    stds = []
    offset = 0
    for k in range(n_layers):
        pts = np.unique(np.concatenate([window_lo[k], t]))
        hi_idx[k] = offset + np.searchsorted(pts, t)
        lo_idx[k] = offset + np.searchsorted(pts, window_lo[k])
        step = np.empty(pts.size)
        step[0] = 0.0
        step[1:] = np.sqrt(density[k] * np.diff(pts))
        stds.append(step)
        offset += pts.size
    return ConePlan(
        kind=kind,
        grid=grid,
        params=p,
        scale_resolution=res,
        layer_lo=lo_edges,
        layer_hi=hi_edges,
        density=density,
        window_lo=window_lo,
        hi_idx=hi_idx,
        lo_idx=lo_idx,
        std=np.concatenate(stds),
    )


def _layer_noise(plan: ConePlan, ss: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(ss)
    g = np.cumsum(rng.standard_normal(plan.std.size) * plan.std)
    return g[plan.hi_idx] - g[plan.lo_idx]


def _assemble(plan: ConePlan, contrib: np.ndarray, k0: int, cutoff: float, var: np.ndarray):
    omega = contrib[k0:].sum(axis=0) - 0.5 * var
    if plan.kind == "nonstationary":
        omega = np.where(plan.grid.times >= cutoff, omega, 0.0)
    return omega


def sample_path_cone(
    kind: str,
    grid: TimeGrid,
    p: CascadeParams,
    seed: SeedLike = None,
    scale_resolution: int = 8,
) -> GaussianLogVolPath:
    """One path of the field drawn from the layered cone construction."""
    plan = build_plan(kind, grid, p, scale_resolution)
    ss = as_seed_sequence(seed)
    if p.lambda2 == 0:
        values = np.zeros(grid.n)
    else:
        values = _assemble(plan, _layer_noise(plan, ss), 0, p.cutoff, plan.variance())
    rec = seed_record(ss)
    rec["sampler"] = f"cone/{scale_resolution}"
    return GaussianLogVolPath(grid, values, plan.kind, p, rec)


def sample_paths_cone(
    kind: str,
    grid: TimeGrid,
    p: CascadeParams,
    reps: int,
    seed: SeedLike = None,
    scale_resolution: int = 8,
) -> np.ndarray:
    """``(reps, n)`` array of independent cone samples."""
    return sample_coupled_cone(kind, grid, p, [p.cutoff], reps, seed, scale_resolution)[0]


def sample_coupled_cone(
    kind: str,
    grid: TimeGrid,
    p: CascadeParams,
    cutoffs: Sequence[float],
    reps: int,
    seed: SeedLike = None,
    scale_resolution: int = 8,
) -> np.ndarray:
    """Fields with several cutoffs built from one white noise.

    Returns an array of shape ``(len(cutoffs), reps, n)``.  For a given
    replica, the field with cutoff ``c`` uses every layer with scale ``>= c``,
    so coarser fields are partial sums of finer ones.  Each cutoff must be of
    the form ``min(cutoffs) * 2**(k/scale_resolution)``.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    cutoffs = [float(c) for c in cutoffs]
    if not cutoffs or min(cutoffs) <= 0:
        raise ParameterError("cutoffs must be positive")
    plan = build_plan(kind, grid, p, scale_resolution, min_cutoff=min(cutoffs))
    firsts = [plan.first_layer(c) for c in cutoffs]
    variances = [plan.variance(c) for c in cutoffs]
    out = np.zeros((len(cutoffs), reps, grid.n))
    if p.lambda2 == 0:
        return out
    for i, ss in enumerate(replica_seeds(seed, reps)):
        contrib = _layer_noise(plan, ss)
        for j, c in enumerate(cutoffs):
            out[j, i] = _assemble(plan, contrib, firsts[j], c, variances[j])
    return out
