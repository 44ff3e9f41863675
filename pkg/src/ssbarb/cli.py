"""
Command-line front end.

Every subcommand writes plot-ready CSV plus a JSON file that embeds the fully
resolved configuration. Settings come from built-in defaults, overridden by
an optional JSON ``--config`` file, overridden by command-line flags. The
config file is a JSON object whose sections mirror ``DEFAULTS`` below.

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 numeric or domain error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from .dynamics import PathSpec, SsbParams, fixed_points, gen_ar1, simulate_path
from .errors import ConfigError, SsbError
from .estimation import EstimatorKind, lambda_series
from .marketdata import load_market_data
from .series import ReturnSeries
from .stats import CumulativeMode, cumulative_returns, summary_stats
from .strategy import (
    SWEEP_COLUMNS,
    GateConfig,
    StrategySpec,
    WeakField,
    run_naive_backtest,
    run_ssb_backtest,
    sweep_ma_windows,
)

logger = logging.getLogger("ssbarb")

DEFAULTS = {
    "seed": 0,
    "simulate": {"model": "ssb"},
    "dynamics": {"lam": 0.75, "lam_c": 1.0, "r_c": 1.0, "rho": 0.0},
    "path": {"r0": 0.1, "n_steps": 200, "noise_std": 0.0},
    "ar1": {"phi": 0.6, "sigma": 1.0, "n": 100_000},
    "phase": {"ratio_min": 0.01, "ratio_max": 2.0, "ratio_step": 0.01, "r_c": 1.0},
    "estimate": {"input": None, "k": 20, "kind": "CurrentDenominator"},
    "data": {"prices": None, "membership": None, "riskfree": None, "benchmark": None},
    "strategy": {"lookback": 1, "holding": 1, "n_groups": 10, "direction": "Contrarian"},
    "gate": {"k": None, "kind": "CurrentDenominator", "weak_field": "Off"},
    "sweep": {"k_min": 2, "k_max": 100, "kind": "CurrentDenominator", "weak_field": "Off",
              "common_sample": False, "workers": 1},
    "stats": {"input": None, "cumulative": "Sum"},
}

SECTIONS = {
    "simulate": ("seed", "simulate", "dynamics", "path", "ar1"),
    "phase": ("phase",),
    "estimate": ("estimate",),
    "backtest": ("data", "strategy", "gate"),
    "sweep": ("data", "strategy", "sweep"),
    "stats": ("stats",),
}

INPUT_KEYS = {("estimate", "input"), ("stats", "input"), ("data", "prices"),
              ("data", "membership"), ("data", "riskfree")}

KINDS = [k.value for k in EstimatorKind]
FIELDS = [w.value for w in WeakField]


# ---------------------------------------------------------------- config

def _flag(parser, flag, key, type=None, help=None, **kw):
    """Register a flag that stores into config ``key`` (``section.name``) only when given."""
    parser.add_argument(flag, dest=key, type=type, default=argparse.SUPPRESS, help=help, **kw)


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _merge(base: dict, update: dict, where: str = "config") -> None:
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown {where} key {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} section {key!r} must be an object")
            _merge(base[key], value, f"{where} section {key!r}")
        else:
            base[key] = value


def resolve_config(command: str, args: dict, config_path=None) -> dict:
    """Defaults, then the config file, then flags; trimmed to ``command``'s sections."""
    cfg = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        _merge(cfg, _load_config_file(config_path))
    for key, value in args.items():
        if "." in key:
            section, name = key.split(".", 1)
            cfg[section][name] = value
        else:
            cfg[key] = value
    out = {"command": command}
    for section in SECTIONS[command]:
        out[section] = cfg[section]
    for section, name in INPUT_KEYS:
        if section in out and out[section][name] is not None:
            if not Path(out[section][name]).is_file():
                raise ConfigError(f"{section}.{name}: file not found: {out[section][name]}")
    return out


def _require(cfg: dict, section: str, *names: str) -> None:
    for name in names:
        if cfg[section][name] is None:
            raise ConfigError(f"missing required setting {section}.{name}")


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value) if integer else float(value)


# ---------------------------------------------------------------- output helpers

def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buf.getvalue()


def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    """Write all files or none: on failure, remove what was written."""
    out = Path(out_dir)
    created = not out.exists()
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        if created:
            shutil.rmtree(out, ignore_errors=True)
        raise
    return written


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg: dict) -> dict[str, str]:
    model = cfg["simulate"]["model"]
    seed = _number(cfg["seed"], "seed", integer=True)
    if model == "ar1":
        a = cfg["ar1"]
        series = gen_ar1(_number(a["phi"], "ar1.phi"), _number(a["sigma"], "ar1.sigma"),
                         _number(a["n"], "ar1.n", integer=True), seed=seed)
        meta = {"config": cfg, "n": len(series)}
    elif model == "ssb":
        d, p = cfg["dynamics"], cfg["path"]
        params = SsbParams(_number(d["lam"], "dynamics.lam"), _number(d["lam_c"], "dynamics.lam_c"),
                           _number(d["r_c"], "dynamics.r_c"), _number(d["rho"], "dynamics.rho"))
        spec = PathSpec(_number(p["r0"], "path.r0"), _number(p["n_steps"], "path.n_steps", integer=True),
                        _number(p["noise_std"], "path.noise_std"), seed)
        series = simulate_path(params, spec)
        meta = {
            "config": cfg,
            "phase": params.phase.value,
            "fixed_points": fixed_points(params),
            "terminal_value": float(series.values[-1]),
        }
    else:
        raise ConfigError(f"simulate.model must be 'ssb' or 'ar1', got {model!r}")
    return {"path.csv": series.to_csv(), "simulate.json": _json(meta)}


def phase_grid(ratio_min: float, ratio_max: float, step: float) -> np.ndarray:
    if not (ratio_min > 0 and ratio_max >= ratio_min and step > 0):
        raise ConfigError("phase grid needs 0 < ratio_min <= ratio_max and ratio_step > 0")
    n = int(math.floor((ratio_max - ratio_min) / step + 1e-9)) + 1
    return np.round(ratio_min + step * np.arange(n), 12)


def cmd_phase(cfg: dict) -> dict[str, str]:
    ph = cfg["phase"]
    r_c = _number(ph["r_c"], "phase.r_c")
    SsbParams(1.0, 1.0, r_c)  # validates r_c
    grid = phase_grid(_number(ph["ratio_min"], "phase.ratio_min"),
                      _number(ph["ratio_max"], "phase.ratio_max"),
                      _number(ph["ratio_step"], "phase.ratio_step"))
    rows = []
    for x in grid.tolist():
        # r_v = sqrt(1 - lambda/lambda_c) r_c below the critical ratio, 0 above
        rows.append((x, math.sqrt(1.0 - x) * r_c if x < 1.0 else 0.0))
    meta = {"config": cfg, "n_points": len(rows)}
    return {"phase.csv": _csv(("lambda_ratio", "asymptotic_return"), rows),
            "phase.json": _json(meta)}


def cmd_estimate(cfg: dict) -> dict[str, str]:
    e = cfg["estimate"]
    _require(cfg, "estimate", "input")
    series = ReturnSeries.from_csv(e["input"])
    k = _number(e["k"], "estimate.k", integer=True)
    try:
        kind = EstimatorKind(e["kind"])
    except ValueError:
        raise ConfigError(f"estimate.kind must be one of {KINDS}") from None
    forecasts = lambda_series(series, k, kind)
    valid = forecasts.values[forecasts.valid()]
    meta = {
        "config": cfg,
        "n_forecasts": len(forecasts),
        "n_degenerate": int(len(forecasts) - valid.size),
        "mean_lambda_hat": float(np.mean(valid)) if valid.size else None,
    }
    return {"lambda.csv": forecasts.to_csv(), "estimate.json": _json(meta)}


def _market(cfg: dict):
    _require(cfg, "data", "prices", "membership", "riskfree", "benchmark")
    d = cfg["data"]
    return load_market_data(d["prices"], d["membership"], d["riskfree"], d["benchmark"])


def _strategy(cfg: dict) -> StrategySpec:
    s = cfg["strategy"]
    return StrategySpec(s["lookback"], s["holding"], s["n_groups"], s["direction"])


TABLE_FIELDS = ("n", "mean", "std", "skewness", "kurtosis", "t_stat", "sharpe", "winning_pct")


def cmd_backtest(cfg: dict) -> dict[str, str]:
    data = _market(cfg)
    spec = _strategy(cfg)
    g = cfg["gate"]
    if g["k"] is None:
        report = run_naive_backtest(data, spec)
    else:
        gate = GateConfig(_number(g["k"], "gate.k", integer=True), g["kind"], g["weak_field"])
        report = run_ssb_backtest(data, spec, gate)
    summary = {name: (s.to_dict() if s is not None else None) for name, s in report.summary().items()}
    files = {}
    for name, series in report.series().items():
        files[f"{name}.csv"] = series.to_csv()
    names = list(report.series())
    curves = {n: cumulative_returns(s).values for n, s in report.series().items()} if len(report.periods) else {}
    files["cumulative.csv"] = _csv(
        ("period",) + tuple(names),
        ([int(p)] + [float(curves[n][i]) for n in names] for i, p in enumerate(report.periods)))
    files["table.csv"] = _csv(
        ("series",) + TABLE_FIELDS,
        ([n] + [summary[n][f] if summary[n] else None for f in TABLE_FIELDS] for n in summary))
    if report.decisions is not None:
        d = report.decisions
        files["mask.csv"] = _csv(
            ("period", "decidable", "executed", "flipped", "lambda_strategy", "lambda_benchmark",
             "rho", "reason"),
            ([int(p), int(d.decidable[i]), int(d.executed[i]), int(d.flipped[i]),
              _finite(d.lambda_strategy[i]), _finite(d.lambda_benchmark[i]), _finite(d.rho[i]),
              d.reasons.get(int(p), "")] for i, p in enumerate(d.periods)))
    meta = {
        "config": cfg,
        "n_periods": int(report.periods.size),
        "n_executed": int(report.executed.sum()) if report.executed is not None else None,
        "skipped_formations": {str(w): r for w, r in report.skipped.items()},
        "summary": summary,
    }
    files["report.json"] = _json(meta)
    return files


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


def cmd_sweep(cfg: dict) -> dict[str, str]:
    sw = cfg["sweep"]
    k_min = _number(sw["k_min"], "sweep.k_min", integer=True)
    k_max = _number(sw["k_max"], "sweep.k_max", integer=True)
    if k_min < 2 or k_max < k_min:
        raise ConfigError("sweep needs 2 <= k_min <= k_max")
    try:
        kind = EstimatorKind(sw["kind"])
        weak = WeakField(sw["weak_field"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = _market(cfg)
    result = sweep_ma_windows(data, _strategy(cfg), kind, range(k_min, k_max + 1), weak,
                              common_sample=bool(sw["common_sample"]),
                              workers=_number(sw["workers"], "sweep.workers", integer=True))
    rows = [[r[c] for c in SWEEP_COLUMNS] for r in result.rows]
    rows.append(["baseline"] + [result.baseline[c] for c in SWEEP_COLUMNS[1:]])
    meta = {
        "config": cfg,
        "rows": result.rows,
        "baseline": result.baseline,
        "failures": {str(k): v for k, v in result.failures.items()},
    }
    return {"sweep.csv": _csv(SWEEP_COLUMNS, rows), "sweep.json": _json(meta)}


def cmd_stats(cfg: dict) -> dict[str, str]:
    _require(cfg, "stats", "input")
    series = ReturnSeries.from_csv(cfg["stats"]["input"])
    try:
        mode = CumulativeMode(cfg["stats"]["cumulative"])
    except ValueError:
        raise ConfigError("stats.cumulative must be 'Sum' or 'Compound'") from None
    meta = {"config": cfg, "summary": summary_stats(series).to_dict()}
    return {"stats.json": _json(meta), "cumulative.csv": cumulative_returns(series, mode).to_csv()}


COMMANDS = {
    "simulate": cmd_simulate,
    "phase": cmd_phase,
    "estimate": cmd_estimate,
    "backtest": cmd_backtest,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
}


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _data_flags(p):
    _flag(p, "--prices", "data.prices", help="prices.csv (date,ticker,close)")
    _flag(p, "--membership", "data.membership", help="membership.csv (ticker,enter_date,exit_date)")
    _flag(p, "--riskfree", "data.riskfree", help="riskfree.csv (date,annual_rate)")
    _flag(p, "--benchmark", "data.benchmark", help="benchmark ticker in prices.csv")
    _flag(p, "--lookback", "strategy.lookback", int, "J, formation weeks")
    _flag(p, "--holding", "strategy.holding", int, "K, holding weeks")
    _flag(p, "--groups", "strategy.n_groups", int, "number of rank groups")
    _flag(p, "--direction", "strategy.direction", choices=["Momentum", "Contrarian"])


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    _flag(common, "--seed", "seed", int, "random seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="ssbarb", description="SSB arbitrage model: dynamics, estimators, backtests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate a return path")
    _flag(p, "--model", "simulate.model", choices=["ssb", "ar1"])
    _flag(p, "--lambda", "dynamics.lam", float, "speed of adjustment")
    _flag(p, "--lambda-c", "dynamics.lam_c", float, "critical speed")
    _flag(p, "--r-c", "dynamics.r_c", float, "cutoff return")
    _flag(p, "--rho", "dynamics.rho", float, "weak field")
    _flag(p, "--r0", "path.r0", float, "initial return")
    _flag(p, "--steps", "path.n_steps", int, "number of steps")
    _flag(p, "--noise", "path.noise_std", float, "Gaussian noise std per step")
    _flag(p, "--phi", "ar1.phi", float, "AR(1) coefficient (model ar1)")
    _flag(p, "--sigma", "ar1.sigma", float, "AR(1) innovation std (model ar1)")
    _flag(p, "--n", "ar1.n", int, "AR(1) length (model ar1)")

    p = sub.add_parser("phase", parents=[common], help="asymptotic return vs lambda/lambda_c")
    _flag(p, "--ratio-min", "phase.ratio_min", float)
    _flag(p, "--ratio-max", "phase.ratio_max", float)
    _flag(p, "--ratio-step", "phase.ratio_step", float)
    _flag(p, "--r-c", "phase.r_c", float)

    p = sub.add_parser("estimate", parents=[common], help="lambda forecasts of a return series")
    _flag(p, "--input", "estimate.input", help="series CSV (period,value)")
    _flag(p, "--k", "estimate.k", int, "moving-average window")
    _flag(p, "--kind", "estimate.kind", choices=KINDS)

    p = sub.add_parser("backtest", parents=[common], help="naive or gated J/K backtest")
    _data_flags(p)
    _flag(p, "--k", "gate.k", int, "gate MA window (omit for the naive strategy)")
    _flag(p, "--kind", "gate.kind", choices=KINDS)
    _flag(p, "--weak-field", "gate.weak_field", choices=FIELDS)

    p = sub.add_parser("sweep", parents=[common], help="gated performance across MA windows")
    _data_flags(p)
    _flag(p, "--k-min", "sweep.k_min", int)
    _flag(p, "--k-max", "sweep.k_max", int)
    _flag(p, "--kind", "sweep.kind", choices=KINDS)
    _flag(p, "--weak-field", "sweep.weak_field", choices=FIELDS)
    _flag(p, "--common-sample", "sweep.common_sample", action=argparse.BooleanOptionalAction)
    _flag(p, "--workers", "sweep.workers", int)

    p = sub.add_parser("stats", parents=[common], help="summary statistics of a return series")
    _flag(p, "--input", "stats.input", help="series CSV (period,value)")
    _flag(p, "--cumulative", "stats.cumulative", choices=["Sum", "Compound"])
    return parser


def main(argv=None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
    except ConfigError as exc:
        print(f"ssbarb: error: {exc}", file=sys.stderr)
        return exc.exit_code
    command = args.pop("command")
    config_path = args.pop("config")
    out = args.pop("out")
    if args.pop("verbose"):
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(command, args, config_path)
        files = COMMANDS[command](cfg)
        written = write_outputs(out, files)
    except SsbError as exc:
        print(f"ssbarb {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        # wrongly typed config values surface here
        print(f"ssbarb {command}: invalid configuration: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
