"""Command-line front end.

Exit codes: 0 success, 2 invalid usage, parameters or input data, 3 numerical
or runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import CascadeError, InputDataError, ParameterError
from .estimators import (
    StructureFunctions,
    expected_cov_approx,
    integral_scale_scan,
    structure_functions,
)
from .experiments import DEFAULT_DELTA_TS, FIGURES, scan_summary, scan_table, simulate
from .gaussian_field import CascadeParams, TimeGrid
from .market_data import magnitude_series, parse_ohlc, write_magnitude_series
from .serialization import (
    covariance_to_dict,
    write_columns,
    write_covariance_csv,
    write_json,
    write_measure,
    write_mrw,
    write_omega,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

# Figure defaults; keys match configuration names.
FIGURE_DEFAULTS = {
    "fig4": {"lambda2": 1.0, "ell": 1.0, "n": 500, "reps": 500},
    "fig5": {"lambda2": 1.0, "ell": 1.0, "n": 500, "reps": 500},
    "fig6c": {"lambda2": 0.01, "ell": 1.0, "n": 20_000, "reps": 1,
              "delta_t": list(DEFAULT_DELTA_TS)},
    "fig8": {"lambda2": 0.01, "ell": 1.0, "n": 20_000, "delta_t": list(DEFAULT_DELTA_TS)},
}
SIMULATE_DEFAULTS = {"model": "nonstationary", "lambda2": 0.01, "ell": 1.0, "n": 500,
                     "t0": 0.0, "sigma2": 1.0, "method": "dense"}
ANALYZE_DEFAULTS = {"delta_t": list(DEFAULT_DELTA_TS), "proxy": "log-range"}
CONFIG_KEYS = ("model", "lambda2", "T", "ell", "sigma2", "n", "dt", "t0", "reps", "seed",
               "delta_t", "q", "tau", "proxy", "out", "format", "method")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values.get(key)

    def to_json(self) -> dict:
        return {"command": self.command, "version": __version__,
                **{k: self.values[k] for k in sorted(self.values)}}


def _float_list(text: str) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and run options")
    g.add_argument("--config", type=Path, help="JSON file with option values; flags override it")
    g.add_argument("--model", choices=("stationary", "nonstationary"))
    g.add_argument("--lambda2", type=float, help="intermittency coefficient")
    g.add_argument("--T", dest="T", type=float, help="integral scale (stationary model)")
    g.add_argument("--ell", type=float, help="small-scale cutoff")
    g.add_argument("--sigma2", type=float, help="variance per unit time")
    g.add_argument("--n", type=int, help="number of grid points")
    g.add_argument("--dt", type=float, help="grid step (default: ell)")
    g.add_argument("--t0", type=float, help="first grid time")
    g.add_argument("--reps", type=int, help="Monte-Carlo replicas")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--delta-t", dest="delta_t", type=_float_list, help="window lengths, comma list")
    g.add_argument("--q", type=_float_list, help="moment orders, comma list")
    g.add_argument("--tau", type=_float_list, help="lags for structure functions, comma list")
    g.add_argument("--proxy", choices=("log-range", "relative-range"))
    g.add_argument("--method", choices=("dense", "cone"), help="field sampler for simulate")
    g.add_argument("--out", type=Path, help="output directory")
    g.add_argument("--format", choices=("csv", "json"), help="format of curve files")

    parser = argparse.ArgumentParser(
        prog="logcascade",
        description="Simulate log-normal cascades and estimate magnitude correlations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="sample field, measure and walk")
    rep = sub.add_parser("reproduce", parents=[common], help="rerun a reference experiment")
    rep.add_argument("figure", choices=sorted(FIGURES))
    ana = sub.add_parser("analyze", parents=[common], help="magnitude analysis of daily OHLC data")
    ana.add_argument("file", type=Path)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    if args.command == "reproduce":
        values = dict(FIGURE_DEFAULTS[args.figure])
    elif args.command == "simulate":
        values = dict(SIMULATE_DEFAULTS)
    else:
        values = dict(ANALYZE_DEFAULTS)
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(CONFIG_KEYS) - {"command", "version", "figure", "file"})
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        values.update({k: v for k, v in loaded.items() if k in CONFIG_KEYS})
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v) if isinstance(v, Path) else v
    values.setdefault("out", ".")
    values.setdefault("format", "csv")
    if args.command == "reproduce":
        values["figure"] = args.figure
    if args.command == "analyze":
        values["file"] = str(args.file)
    stochastic = args.command in ("simulate", "reproduce")
    if stochastic and values.get("seed") is None:
        raise UsageError(f"{args.command} needs --seed (or 'seed' in the config file)")
    return ExperimentConfig(args.command, values)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.to_json(), out / "config.json")
    return out


def _write_table(out: Path, name: str, table: dict, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{name}.json"
        write_json(table, path)
    else:
        path = out / f"{name}.csv"
        with open(path, "w") as fh:
            cols = [np.asarray(v, dtype=float) for v in table.values()]
            write_columns(fh, tuple(table), *cols)
    return path


def _params(cfg: ExperimentConfig) -> CascadeParams:
    return CascadeParams(lambda2=float(cfg["lambda2"]), cutoff=float(cfg["ell"]),
                         integral_scale=None if cfg["T"] is None else float(cfg["T"]),
                         sigma2=float(cfg["sigma2"] if cfg["sigma2"] is not None else 1.0))


def run_simulate(cfg: ExperimentConfig) -> int:
    p = _params(cfg)
    if cfg["model"] == "stationary" and p.integral_scale is None:
        raise ParameterError("the stationary model needs --T")
    dt = float(cfg["dt"] if cfg["dt"] is not None else p.cutoff)
    grid = TimeGrid(float(cfg["t0"]), dt, int(cfg["n"]))
    sim = simulate(cfg["model"], grid, p, int(cfg["seed"]), method=cfg["method"])
    out = _out_dir(cfg)
    for name, writer, obj in (("omega.csv", write_omega, sim.omega),
                              ("measure.csv", write_measure, sim.measure),
                              ("mrw.csv", write_mrw, sim.mrw)):
        with open(out / name, "w") as fh:
            writer(obj, fh)
    summary = dict(sim.summary)
    if cfg["q"] is not None:
        taus = cfg["tau"] or [dt * k for k in (1, 2, 4, 8, 16) if k < grid.n]
        sf = structure_functions(sim.mrw, cfg["q"], taus)
        _write_structure(out, sf, cfg["format"])
        summary["zeta_hat"] = dict(zip((f"{q:g}" for q in sf.q), sf.zeta_hat.tolist()))
    write_json(summary, out / "summary.json")
    print(f"omega: mean {summary['omega_mean']:.6g}  variance {summary['omega_var']:.6g}")
    print(f"M(t)/t at t={grid.n * dt:g}: {summary['measure_over_t']:.6g} (sigma2 = {p.sigma2:g})")
    print(f"wrote omega.csv, measure.csv, mrw.csv to {out}")
    return EXIT_OK


def _write_structure(out: Path, sf: StructureFunctions, fmt: str) -> None:
    qq, tt = np.meshgrid(sf.q, sf.tau, indexing="ij")
    _write_table(out, "structure", {"q": qq.ravel(), "tau": tt.ravel(),
                                    "moment": sf.moments.ravel()}, fmt)
    _write_table(out, "zeta", {"q": sf.q, "zeta_hat": sf.zeta_hat,
                               "zeta_stderr": sf.zeta_stderr, "c_q": sf.c_q}, fmt)


_FIGURE_ARGS = {
    "fig4": ("reps", "lambda2", "ell", "n", "dt", "t0"),
    "fig5": ("reps", "lambda2", "ell", "n", "dt", "t0"),
    "fig6c": ("reps", "lambda2", "ell", "n", "delta_t"),
    "fig8": ("lambda2", "ell", "n", "delta_t"),
}
_RENAME = {"n": "length", "delta_t": "delta_ts"}


def run_reproduce(cfg: ExperimentConfig) -> int:
    fig = cfg["figure"]
    kwargs = {}
    for key in _FIGURE_ARGS[fig]:
        if cfg[key] is not None:
            name = _RENAME.get(key, key) if fig in ("fig6c", "fig8") else key
            kwargs[name] = cfg[key]
    res = FIGURES[fig](seed=int(cfg["seed"]), **kwargs)
    out = _out_dir(cfg)
    for name, table in res.tables.items():
        _write_table(out, f"{fig}_{name}", table, cfg["format"])
    write_json(res.summary, out / f"{fig}_summary.json")
    print(f"{fig}: {'PASS' if res.passed else 'FAIL'}  (details in {out / (fig + '_summary.json')})")
    return EXIT_OK


def run_analyze(cfg: ExperimentConfig) -> int:
    src = Path(cfg["file"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with open(src, newline="") as fh:
            parsed = parse_ohlc(fh)
        for line, msg in parsed.errors:
            print(f"{src}:{line}: rejected: {msg}", file=sys.stderr)
        if not parsed.records:
            raise InputDataError("no valid records")
        series = magnitude_series(parsed.records, cfg["proxy"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    s = series.as_magnitude_series()
    delta_ts = [float(d) for d in cfg["delta_t"]]
    if min(delta_ts) * 2 > s.n:
        raise InputDataError(
            f"series too short: {s.n} trading days, need at least {int(2 * min(delta_ts))} "
            f"for delta_t={min(delta_ts):g}"
        )
    delta_ts = [d for d in delta_ts if 2 * d <= s.n]
    scan = integral_scale_scan(s, delta_ts)
    fitted = [f.lambda2_hat for f in scan.fits.values() if not f.degenerate]
    if cfg["lambda2"] is not None:
        lam2, lam2_source = float(cfg["lambda2"]), "user"
    else:
        lam2 = float(np.median(fitted)) if fitted else 0.0
        lam2_source = "fitted"
    out = _out_dir(cfg)
    with open(out / "magnitude.csv", "w") as fh:
        write_magnitude_series(series, fh)
    covs = {}
    for d, cov in scan.covariances.items():
        theory = np.full(cov.lags.shape, np.nan)
        theory[1:] = expected_cov_approx(cov.lags[1:], d, lam2)
        if cfg["format"] == "json":
            rec = covariance_to_dict(cov, scan.fits[d])
            rec["theory"] = theory
            write_json(rec, out / f"covariance_dt{d:g}.json")
        else:
            with open(out / f"covariance_dt{d:g}.csv", "w") as fh:
                write_covariance_csv(cov, fh, theory)
        covs[f"{d:g}"] = {"lambda2_hat": scan.fits[d].lambda2_hat, "T_hat": scan.fits[d].T_hat}
    _write_table(out, "scan", scan_table(scan), cfg["format"])
    summary = {
        "file": str(src), "records": len(parsed.records), "rejected_rows": len(parsed.errors),
        "skipped_zero_range": series.n_skipped, "proxy": series.proxy_kind,
        "trading_days": s.n, "lambda2_overlay": lam2, "lambda2_overlay_source": lam2_source,
        "fits": covs, "regression": scan_summary(scan),
    }
    write_json(summary, out / "summary.json")
    print(f"{s.n} trading days; fitted lambda2 (median over windows): "
          f"{np.median(fitted) if fitted else float('nan'):.4g}")
    for r in scan.rows:
        ratio = "degenerate" if r.T_hat is None else f"T/dt = {r.T_hat / r.delta_t:.3f}"
        print(f"  delta_t={r.delta_t:g}: {ratio}")
    return EXIT_OK


COMMANDS = {"simulate": run_simulate, "reproduce": run_reproduce, "analyze": run_analyze}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ParameterError, InputDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CascadeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
