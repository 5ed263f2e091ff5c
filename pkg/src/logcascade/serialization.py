"""CSV and JSON readers and writers for paths and covariance estimates.

Floats are written with 17 significant digits so every round trip is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np

from .cascade_measure import MeasurePath, MrwPath
from .errors import InputDataError
from .estimators import CovarianceEstimate, ScalingFit
from .gaussian_field import GaussianLogVolPath

PathLike = Union[str, Path]


def fmt(x: float) -> str:
    return "%.17g" % (x + 0.0)  # no negative zero


def write_columns(out: TextIO, header: tuple, *columns) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_columns(src: TextIO, header: tuple) -> tuple[np.ndarray, ...]:
    """Read a numeric CSV whose first line must equal ``header``."""
    rows = list(csv.reader(src))
    if not rows or tuple(c.strip() for c in rows[0]) != tuple(header):
        raise InputDataError(f"expected header {','.join(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InputDataError(f"non-numeric value: {exc}") from None
    if data.size == 0:
        return tuple(np.empty(0) for _ in header)
    return tuple(data.T)


def write_omega(path: GaussianLogVolPath, out: TextIO) -> None:
    """``t,omega`` rows at the grid times."""
    write_columns(out, ("t", "omega"), path.grid.times.astype(float), path.values.astype(float))


def write_measure(m: MeasurePath, out: TextIO) -> None:
    """``t,M`` rows at the right end of every cell."""
    write_columns(out, ("t", "M"), m.times.astype(float), m.cumulative.astype(float))


def write_mrw(x: MrwPath, out: TextIO) -> None:
    """``t,X`` rows at the right end of every cell (the origin value 0 is implied)."""
    write_columns(out, ("t", "X"), x.times[1:].astype(float), np.asarray(x.values[1:], float))


def _none_if_nan(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def covariance_to_dict(
    c: CovarianceEstimate, fit: Optional[ScalingFit] = None, seed=None
) -> dict:
    return {
        "lags": [float(v) for v in c.lags],
        "values": [float(v) for v in c.values],
        "stderr": None if c.stderr is None else [float(v) for v in c.stderr],
        "fit": None if fit is None else {
            "lambda2": float(fit.lambda2_hat),
            "T": _none_if_nan(fit.T_hat),
            "residual_rms": float(fit.residual_rms),
        },
        "meta": {
            "delta_t": float(c.delta_t),
            "n_subsamples": int(c.n_subsamples),
            "seed": seed,
        },
    }


def covariance_from_dict(d: dict) -> CovarianceEstimate:
    try:
        meta = d["meta"]
        return CovarianceEstimate(
            lags=np.asarray(d["lags"], dtype=float),
            values=np.asarray(d["values"], dtype=float),
            stderr=None if d["stderr"] is None else np.asarray(d["stderr"], dtype=float),
            delta_t=float(meta["delta_t"]),
            n_subsamples=int(meta["n_subsamples"]),
        )
    except (KeyError, TypeError) as exc:
        raise InputDataError(f"malformed covariance record: {exc}") from None


def write_covariance_json(c: CovarianceEstimate, out: TextIO, fit=None, seed=None) -> None:
    json.dump(to_jsonable(covariance_to_dict(c, fit, seed)), out, indent=2, allow_nan=False)
    out.write("\n")


def read_covariance_json(src: TextIO) -> CovarianceEstimate:
    return covariance_from_dict(json.load(src))


def write_covariance_csv(c: CovarianceEstimate, out: TextIO, theory=None) -> None:
    """One row per lag: ``lag,value,stderr`` plus ``theory`` when given."""
    stderr = c.stderr if c.stderr is not None else np.full(c.lags.shape, np.nan)
    header = ("lag", "value", "stderr")
    cols = [c.lags.astype(float), np.asarray(c.values, float), np.asarray(stderr, float)]
    if theory is not None:
        header += ("theory",)
        cols.append(np.asarray(theory, dtype=float))
    write_columns(out, header, *cols)


def read_covariance_csv(src: TextIO, delta_t: float, n_subsamples: int) -> CovarianceEstimate:
    lags, values, stderr = read_columns(src, ("lag", "value", "stderr"))
    return CovarianceEstimate(
        lags=lags, values=values, stderr=None if np.all(np.isnan(stderr)) else stderr,
        delta_t=delta_t, n_subsamples=n_subsamples,
    )


def to_jsonable(o):
    """Recursively convert numpy values to plain Python; NaN and inf become None."""
    if isinstance(o, dict):
        return {str(k): to_jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in o]
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return float(o) if math.isfinite(o) else None
    if isinstance(o, Path):
        return str(o)
    return o


def write_json(obj, path: PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
