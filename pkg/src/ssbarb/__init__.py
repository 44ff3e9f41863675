"""Symmetry-breaking model of arbitrage returns: dynamics, lambda estimators,
a gated momentum/contrarian backtester and performance statistics."""

from .dynamics import (
    PathSpec,
    Phase,
    SsbParams,
    classify_phase,
    drift,
    exact_solution,
    fixed_points,
    gen_ar1,
    psi_solutions,
    simulate_path,
    spontaneous_return,
)
from .errors import ConfigError, DataError, NumericError, SsbError
from .estimation import EstimatorKind, RhoMode, estimate_lambda, estimate_rho, lambda_series
from .marketdata import MarketData, load_market_data, save_market_data, weekly_returns
from .series import ReturnSeries
from .stats import CumulativeMode, SummaryStats, cumulative_returns, summary_stats
from .strategy import (
    Direction,
    GateConfig,
    StrategySpec,
    WeakField,
    run_naive_backtest,
    run_ssb_backtest,
    sweep_ma_windows,
)

__version__ = "0.1.0"

__all__ = [
    "PathSpec", "Phase", "SsbParams", "classify_phase", "drift", "exact_solution",
    "fixed_points", "gen_ar1", "psi_solutions", "simulate_path", "spontaneous_return",
    "ConfigError", "DataError", "NumericError", "SsbError",
    "EstimatorKind", "RhoMode", "estimate_lambda", "estimate_rho", "lambda_series",
    "MarketData", "load_market_data", "save_market_data", "weekly_returns",
    "ReturnSeries",
    "CumulativeMode", "SummaryStats", "cumulative_returns", "summary_stats",
    "Direction", "GateConfig", "StrategySpec", "WeakField",
    "run_naive_backtest", "run_ssb_backtest", "sweep_ma_windows",
]
