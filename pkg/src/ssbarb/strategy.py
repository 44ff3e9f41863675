"""
J/K momentum and contrarian decile portfolios, the naive weekly backtest,
and the symmetry-breaking execution gate.

Each week ``t`` the index members are ranked on their return from the first
close of week ``t-J`` to the last close of week ``t-1``; the worst group is
the loser basket, the best the winner basket. The zero-cost portfolio is
opened at the first close of week ``t`` and held ``K`` weeks.

The gate forecasts lambda for the strategy (from its own naive excess-return
history) and for the benchmark (lambda_c) using data up to week ``t-1``, and
trades week ``t`` only when the strategy forecast is below the benchmark one.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ConstructionError, DataError, InsufficientDataError
from .estimation import EstimatorKind, check_window, lambda_series
from .marketdata import MarketData, week_start, weekly_bars
from .series import ReturnSeries
from .stats import SummaryStats, summary_stats

logger = logging.getLogger(__name__)

ZERO_COST_TOL = 1e-12


class Direction(enum.Enum):
    Momentum = "Momentum"
    Contrarian = "Contrarian"

    def __str__(self):
        return self.value


class WeakField(enum.Enum):
    Off = "Off"
    WindowMean = "WindowMean"
    PreviousReturn = "PreviousReturn"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class StrategySpec:
    lookback: int = 1
    holding: int = 1
    n_groups: int = 10
    direction: Direction = Direction.Contrarian

    def __post_init__(self):
        for name, lo in (("lookback", 1), ("holding", 1), ("n_groups", 2)):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer)) or int(v) != v or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
            object.__setattr__(self, name, int(v))
        try:
            object.__setattr__(self, "direction", Direction(self.direction))
        except ValueError:
            raise ConfigError(f"unknown direction {self.direction!r}") from None


@dataclass(frozen=True)
class GateConfig:
    k: int
    kind: EstimatorKind = EstimatorKind.CurrentDenominator
    weak_field: WeakField = WeakField.Off

    def __post_init__(self):
        object.__setattr__(self, "k", check_window(self.k))
        try:
            object.__setattr__(self, "kind", EstimatorKind(self.kind))
            object.__setattr__(self, "weak_field", WeakField(self.weak_field))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class PortfolioWeights:
    """Zero-cost weights: +1 of gross on the long side, -1 on the short side."""

    period: int
    weights: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(sorted(self.weights.items())))

    @property
    def long(self) -> list[str]:
        return [t for t, w in self.weights.items() if w > 0]

    @property
    def short(self) -> list[str]:
        return [t for t, w in self.weights.items() if w < 0]

    def net(self) -> float:
        return math.fsum(self.weights.values())

    def gross(self) -> float:
        return math.fsum(abs(w) for w in self.weights.values())

    def negate(self) -> "PortfolioWeights":
        return PortfolioWeights(self.period, {t: -w for t, w in self.weights.items()})


# ------------------------------------------------------------ construction

def rank_universe(returns: Mapping[str, float], n_groups: int = 10) -> list[list[str]]:
    """Sort tickers ascending by lookback return and cut into ``n_groups``.

    Group 0 holds the worst performers. Ties are broken by ticker name. When
    the count does not divide evenly the lower groups get one extra name
    each, so sizes differ by at most one.
    """
    if n_groups < 2:
        raise ConfigError(f"n_groups must be >= 2, got {n_groups}")
    items = [(float(r), str(t)) for t, r in returns.items() if np.isfinite(r)]
    if len(items) < n_groups:
        raise ConstructionError(
            f"need at least {n_groups} tickers with valid lookback returns, got {len(items)}")
    ordered = [t for _, t in sorted(items)]
    base, extra = divmod(len(ordered), n_groups)
    groups, start = [], 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        groups.append(ordered[start:start + size])
        start += size
    return groups


def build_portfolio(groups: Sequence[Sequence[str]], direction: Direction = Direction.Contrarian,
                    period: int = 0) -> PortfolioWeights:
    """Equal-weight long/short portfolio from ranked groups.

    Momentum buys the top group and shorts the bottom one; Contrarian is the
    exact negation.
    """
    if len(groups) < 2 or not groups[0] or not groups[-1]:
        raise ConstructionError("extreme groups must be non-empty")
    losers, winners = list(groups[0]), list(groups[-1])
    sign = 1.0 if Direction(direction) is Direction.Momentum else -1.0
    weights = {}
    for t in winners:
        weights[t] = sign / len(winners)
    for t in losers:
        weights[t] = -sign / len(losers)
    return PortfolioWeights(period, weights)


def holding_return(weights: PortfolioWeights, realized: Mapping[str, float]) -> float:
    """``sum(w * r)`` over the weighted tickers."""
    terms = []
    for t, w in weights.weights.items():
        r = realized.get(t)
        if r is None or not np.isfinite(r):
            raise DataError(f"no realized return for held ticker {t!r} in period {weights.period}")
        terms.append(w * r)
    return math.fsum(terms)


# ------------------------------------------------------------ naive backtest

@dataclass(frozen=True, eq=False)
class GateDecisions:
    """Per-period execute/skip decisions of the gate, aligned to ``periods``."""

    periods: np.ndarray
    decidable: np.ndarray
    executed: np.ndarray
    flipped: np.ndarray
    lambda_strategy: np.ndarray
    lambda_benchmark: np.ndarray
    rho: np.ndarray
    reasons: dict[int, str]
    gate: GateConfig

    def apply(self, excess: np.ndarray, raw: Optional[np.ndarray] = None,
              rf: Optional[np.ndarray] = None) -> np.ndarray:
        """Gated excess returns: naive on executed weeks, 0 on skipped weeks.

        Flipped weeks hold the negated portfolio, earning ``-raw - rf``.
        """
        excess = np.asarray(excess, dtype=np.float64)
        out = np.where(self.executed, excess, 0.0)
        if self.flipped.any():
            if raw is None:
                raw = excess if rf is None else excess + rf
            rf = np.zeros_like(excess) if rf is None else rf
            out = np.where(self.executed & self.flipped, -np.asarray(raw) - rf, out)
        return out


@dataclass(frozen=True, eq=False)
class BacktestReport:
    """Weekly series of one strategy run; all share ``periods`` (week numbers).

    ``long_short`` is the zero-cost return net of the risk-free rate, as are
    ``winner``, ``loser`` and ``benchmark``. ``long_short_raw`` is the bare
    zero-cost return ``sum(w * r)``. ``weights`` holds the portfolio formed
    each week. Gated fields are ``None`` for a naive run.
    """

    spec: StrategySpec
    periods: np.ndarray
    winner: ReturnSeries
    loser: ReturnSeries
    long_short: ReturnSeries
    long_short_raw: ReturnSeries
    benchmark: ReturnSeries
    risk_free: ReturnSeries
    weights: dict[int, PortfolioWeights]
    skipped: dict[int, str]
    benchmark_history: ReturnSeries
    gate: Optional[GateConfig] = None
    gated: Optional[ReturnSeries] = None
    decisions: Optional[GateDecisions] = None

    @property
    def executed(self) -> Optional[np.ndarray]:
        return None if self.decisions is None else self.decisions.executed

    def series(self) -> dict[str, ReturnSeries]:
        out = {
            "winner": self.winner,
            "loser": self.loser,
            "long_short": self.long_short,
            "long_short_raw": self.long_short_raw,
            "benchmark": self.benchmark,
            "risk_free": self.risk_free,
        }
        if self.gated is not None:
            out["gated"] = self.gated
        return out

    def evaluation_mask(self) -> np.ndarray:
        """Periods counted in performance: all for naive runs, post-warm-up when gated."""
        if self.decisions is None:
            return np.ones(self.periods.size, dtype=bool)
        return self.decisions.decidable

    def summary(self) -> dict[str, Optional[SummaryStats]]:
        out = {}
        for name, s in self.series().items():
            out[name] = _safe_stats(s.values)
        if self.gated is not None:
            mask = self.evaluation_mask()
            out["gated"] = _safe_stats(self.gated.values[mask])
            out["naive_in_window"] = _safe_stats(self.long_short.values[mask])
        return out


def _safe_stats(values) -> Optional[SummaryStats]:
    try:
        return summary_stats(values)
    except InsufficientDataError:
        return None


@dataclass
class _Cohort:
    formed_pos: int
    weights: PortfolioWeights
    winners: list[str]
    losers: list[str]
    alive: set = field(default_factory=set)


def run_naive_backtest(data: MarketData, spec: StrategySpec) -> BacktestReport:
    """Ungated J/K backtest over every feasible week.

    For ``K > 1`` the ``K`` overlapping cohorts active in a week are averaged
    with equal weight. A held ticker earns its return from the week's first
    printed close to its last printed close; if it misses the week's last
    trading day the position is liquidated at that last close and held as
    cash afterwards. Weeks that cannot be formed are skipped and logged.
    """
    J, K = spec.lookback, spec.holding
    bars = weekly_bars(data.prices)
    weeks = bars.weeks
    n_weeks = weeks.size
    if n_weeks < J + K + 1:
        raise InsufficientDataError(
            f"backtest needs at least J+K+1 = {J + K + 1} trading weeks, data has {n_weeks}")

    tickers = [t for t in data.prices.tickers if t != data.benchmark]
    col = {t: j for j, t in enumerate(bars.first.columns)}
    cols = np.array([col[t] for t in tickers], dtype=np.int64)
    first = bars.first.to_numpy()[:, cols]
    last = bars.last.to_numpy()[:, cols]
    first_av = bars.first_available.to_numpy()[:, cols]
    last_av = bars.last_available.to_numpy()[:, cols]
    bj = col[data.benchmark]
    bench_ret = bars.last.to_numpy()[:, bj] / bars.first.to_numpy()[:, bj] - 1.0
    rf_weekly = data.risk_free.weekly
    rf = np.array([rf_weekly.get(int(w), np.nan) for w in weeks])
    bench_excess = bench_ret - rf
    index = {t: i for i, t in enumerate(tickers)}

    skipped: dict[int, str] = {}
    cohorts: dict[int, _Cohort] = {}
    for p in range(J, n_weeks):
        week = int(weeks[p])
        reason = None
        if not np.isfinite(bench_ret[p]):
            reason = "benchmark close missing"
        elif not np.isfinite(rf[p]):
            reason = "risk-free rate missing"
        if reason is None:
            members = data.membership.members_at(bars.first_date.iloc[p])
            idx = [index[t] for t in members if t in index]
            if idx:
                idx = np.array(idx)
                lookback = last[p - 1, idx] / first[p - J, idx] - 1.0
                ok = np.isfinite(lookback) & np.isfinite(first[p, idx])
                returns = {tickers[i]: float(r) for i, r, good in zip(idx, lookback, ok) if good}
            else:
                returns = {}
            try:
                groups = rank_universe(returns, spec.n_groups)
                weights = build_portfolio(groups, spec.direction, period=week)
            except ConstructionError as exc:
                reason = str(exc)
        if reason is not None:
            if p + K - 1 < n_weeks:
                skipped[week] = reason
                logger.info("week %d (%s) not formed: %s", week, week_start(week), reason)
            continue
        if p + K - 1 >= n_weeks:
            break
        cohorts[p] = _Cohort(p, weights, groups[-1], groups[0], set(weights.weights))

    periods, rows, pf = [], [], {}
    for q in range(J, n_weeks):
        active = [cohorts[p] for p in range(q - K + 1, q + 1) if p in cohorts]
        week = int(weeks[q])
        if not active or not np.isfinite(bench_excess[q]):
            if week not in skipped and active:
                skipped[week] = "benchmark or risk-free missing during holding"
            continue
        win, lose, ls = [], [], []
        for c in active:
            realized = _realize(c, q, index, first_av, last_av, last)
            win.append(float(np.mean([realized[t] for t in c.winners])))
            lose.append(float(np.mean([realized[t] for t in c.losers])))
            ls.append(holding_return(c.weights, realized))
        if q in cohorts:
            pf[week] = cohorts[q].weights
        periods.append(week)
        rows.append((math.fsum(win) / len(win), math.fsum(lose) / len(lose),
                     math.fsum(ls) / len(ls), bench_excess[q], rf[q]))

    periods = np.array(periods, dtype=np.int64)
    arr = np.array(rows, dtype=np.float64).reshape(-1, 5)
    rfp = arr[:, 4]
    bench_hist_mask = np.isfinite(bench_excess)
    return BacktestReport(
        spec=spec,
        periods=periods,
        winner=ReturnSeries(periods, arr[:, 0] - rfp),
        loser=ReturnSeries(periods, arr[:, 1] - rfp),
        long_short=ReturnSeries(periods, arr[:, 2] - rfp),
        long_short_raw=ReturnSeries(periods, arr[:, 2]),
        benchmark=ReturnSeries(periods, arr[:, 3]),
        risk_free=ReturnSeries(periods, rfp),
        weights=pf,
        skipped=dict(sorted(skipped.items())),
        benchmark_history=ReturnSeries(weeks[bench_hist_mask], bench_excess[bench_hist_mask]),
    )


def _realize(c: _Cohort, q: int, index, first_av, last_av, last) -> dict[str, float]:
    """Week-``q`` returns of a cohort's tickers; updates which are still held."""
    out = {}
    for t in c.weights.weights:
        if t not in c.alive:
            out[t] = 0.0
            continue
        i = index[t]
        a, b = first_av[q, i], last_av[q, i]
        if not (np.isfinite(a) and np.isfinite(b)):
            out[t] = 0.0
            c.alive.discard(t)
            continue
        out[t] = b / a - 1.0
        if not np.isfinite(last[q, i]):
            c.alive.discard(t)
    return out


# ------------------------------------------------------------ gate

def gate_decision(lambda_strategy: float, lambda_benchmark: float,
                  rho: float = math.nan) -> tuple[bool, bool]:
    """``(execute, flip)`` for one week.

    Execute iff both forecasts are finite and the strategy's is strictly
    below the benchmark's; flip when executing under a negative weak field.
    """
    execute = bool(math.isfinite(lambda_strategy) and math.isfinite(lambda_benchmark)
                   and lambda_strategy < lambda_benchmark)
    return execute, bool(execute and rho < 0)


def ssb_gate(strategy: ReturnSeries, benchmark: ReturnSeries, gate: GateConfig) -> GateDecisions:
    """Execute/skip decision for each period of ``strategy``.

    The decision for period ``t`` uses the last ``k + 1`` strategy returns
    before ``t`` and the last ``k + 1`` benchmark returns dated before ``t``.
    Trade iff lambda_strategy < lambda_benchmark. With a weak field, a
    negative forecast of rho flips the portfolio. Degenerate windows skip the
    week rather than abort.
    """
    k = gate.k
    periods = strategy.periods
    n = periods.size
    lam_s = np.full(n, np.nan)
    lam_b = np.full(n, np.nan)
    rho = np.full(n, np.nan)
    decidable = np.zeros(n, dtype=bool)
    executed = np.zeros(n, dtype=bool)
    flipped = np.zeros(n, dtype=bool)
    reasons: dict[int, str] = {}

    s_fore = lambda_series(strategy, k, gate.kind).values if len(strategy) >= k + 1 else np.array([])
    b_fore = lambda_series(benchmark, k, gate.kind).values if len(benchmark) >= k + 1 else np.array([])
    b_pos = np.searchsorted(benchmark.periods, periods) - 1  # last benchmark return before t
    x = strategy.values
    if gate.weak_field is WeakField.WindowMean and n > k:
        means = sliding_window_view(x, k).mean(axis=1)  # means[m] covers x[m:m+k]
    for j in range(n):
        week = int(periods[j])
        if j - 1 < k or b_pos[j] < k:
            reasons[week] = "warm-up: insufficient history for the estimator window"
            continue
        decidable[j] = True
        lam_s[j] = s_fore[j - 1 - k]
        lam_b[j] = b_fore[b_pos[j] - k]
        if gate.weak_field is WeakField.WindowMean:
            rho[j] = means[j - k]
        elif gate.weak_field is WeakField.PreviousReturn:
            rho[j] = x[j - 1]
        executed[j], flipped[j] = gate_decision(lam_s[j], lam_b[j], rho[j])
        if not (np.isfinite(lam_s[j]) and np.isfinite(lam_b[j])):
            reasons[week] = "degenerate estimator window"
            logger.info("week %d skipped: degenerate estimator window", week)
        elif not executed[j]:
            reasons[week] = "lambda_strategy >= lambda_benchmark"
    return GateDecisions(periods, decidable, executed, flipped, lam_s, lam_b, rho,
                         reasons, gate)


def run_ssb_backtest(data: MarketData, spec: StrategySpec, gate: GateConfig,
                     naive: Optional[BacktestReport] = None) -> BacktestReport:
    """Naive backtest plus the gated series.

    Lambda for the strategy is forecast from the naive (ungated) excess
    series, so skipped weeks never feed zeros into the estimator.
    """
    if naive is None:
        naive = run_naive_backtest(data, spec)
    return apply_gate(naive, gate)


def apply_gate(naive: BacktestReport, gate: GateConfig) -> BacktestReport:
    decisions = ssb_gate(naive.long_short, naive.benchmark_history, gate)
    gated = decisions.apply(naive.long_short.values, naive.long_short_raw.values,
                            naive.risk_free.values)
    return BacktestReport(
        spec=naive.spec,
        periods=naive.periods,
        winner=naive.winner,
        loser=naive.loser,
        long_short=naive.long_short,
        long_short_raw=naive.long_short_raw,
        benchmark=naive.benchmark,
        risk_free=naive.risk_free,
        weights=naive.weights,
        skipped=naive.skipped,
        benchmark_history=naive.benchmark_history,
        gate=gate,
        gated=ReturnSeries(naive.periods, gated),
        decisions=decisions,
    )


def executed_weights(report: BacktestReport, week: int) -> Optional[PortfolioWeights]:
    """Weights actually held from week ``week`` after gating (``None`` when skipped)."""
    w = report.weights.get(week)
    if w is None or report.decisions is None:
        return w
    pos = int(np.searchsorted(report.periods, week))
    if not report.decisions.executed[pos]:
        return None
    return w.negate() if report.decisions.flipped[pos] else w


# ------------------------------------------------------------ sweep

SWEEP_COLUMNS = ("k", "n", "mean", "std", "sharpe", "winning_pct", "executed_pct",
                 "naive_mean", "naive_std", "naive_sharpe", "naive_winning_pct")


@dataclass(frozen=True)
class SweepResult:
    rows: list[dict]
    baseline: dict
    failures: dict[int, str]
    common_sample: bool


def _row_stats(values: np.ndarray) -> dict:
    s = _safe_stats(values)
    if s is None:
        return {"n": int(values.size), "mean": None, "std": None, "sharpe": None, "winning_pct": None}
    return {"n": s.n, "mean": s.mean, "std": s.std, "sharpe": s.sharpe, "winning_pct": s.winning_pct}


def sweep_ma_windows(data: MarketData | BacktestReport, spec: Optional[StrategySpec] = None,
                     kind: EstimatorKind = EstimatorKind.CurrentDenominator,
                     k_range: Sequence[int] = range(2, 101),
                     weak_field: WeakField = WeakField.Off,
                     common_sample: bool = False, workers: int = 1) -> SweepResult:
    """Gated performance for each MA window ``k`` plus the naive baseline.

    By default each ``k`` is scored on the weeks after its own warm-up, and
    the baseline on the whole naive sample. With ``common_sample`` every row,
    baseline included, uses the weeks decidable for all ``k``.
    ``data`` may also be a precomputed naive report.
    """
    naive = data if isinstance(data, BacktestReport) else run_naive_backtest(data, spec)
    kind = EstimatorKind(kind)
    weak_field = WeakField(weak_field)
    n = naive.periods.size
    failures: dict[int, str] = {}
    valid_ks = []
    for k in k_range:
        if isinstance(k, bool) or int(k) != k or not 2 <= k <= n - 2:
            failures[int(k)] = f"k outside [2, {n - 2}] for a series of length {n}"
        else:
            valid_ks.append(int(k))

    def run(k):
        return k, apply_gate(naive, GateConfig(k, kind, weak_field)).decisions

    if workers > 1 and len(valid_ks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, valid_ks))
    else:
        results = [run(k) for k in valid_ks]

    ls = naive.long_short.values
    if common_sample and results:
        common = np.logical_and.reduce([d.decidable for _, d in results])
    else:
        common = None

    rows = []
    for k, d in results:
        mask = common if common is not None else d.decidable
        gated = d.apply(ls, naive.long_short_raw.values, naive.risk_free.values)[mask]
        if gated.size < 2:
            failures[k] = f"only {gated.size} evaluation weeks after warm-up"
            continue
        row = {"k": k}
        row.update(_row_stats(gated))
        row["executed_pct"] = float(d.executed[mask].mean())
        naive_stats = _row_stats(ls[mask])
        row.update({f"naive_{key}": naive_stats[key] for key in ("mean", "std", "sharpe", "winning_pct")})
        rows.append(row)

    base_values = ls[common] if common is not None else ls
    baseline = {"k": None}
    baseline.update(_row_stats(base_values))
    baseline["executed_pct"] = 1.0
    baseline.update({f"naive_{key}": baseline[key] for key in ("mean", "std", "sharpe", "winning_pct")})
    return SweepResult(rows=rows, baseline=baseline, failures=dict(sorted(failures.items())),
                       common_sample=common_sample)
