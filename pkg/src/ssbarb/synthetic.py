"""Synthetic markets for tests, demos and the acceptance checks.

Everything is seeded through ``numpy.random.default_rng`` and returns the same
``MarketData`` bundle the CSV loaders produce.
"""

from __future__ import annotations

import datetime as dt

import numpy as np
import pandas as pd

from .marketdata import (
    MarketData,
    MembershipCalendar,
    PriceTable,
    RiskFreeSeries,
    week_of,
)

DEFAULT_START = dt.date(2001, 1, 1)  # a Monday


def _calendar(start: dt.date, n_weeks: int, days_per_week: int, rng=None, holiday_prob=0.0):
    start = start - dt.timedelta(days=start.weekday())
    days = []
    for w in range(n_weeks):
        monday = start + dt.timedelta(weeks=w)
        week_days = [monday + dt.timedelta(days=d) for d in range(days_per_week)]
        if rng is not None and holiday_prob > 0 and days_per_week > 2:
            # drop one interior or edge day now and then, never the whole week
            if rng.random() < holiday_prob:
                week_days.pop(int(rng.integers(len(week_days))))
        days.extend(week_days)
    return pd.DatetimeIndex(days, name="date")


def _tickers(n: int, prefix: str = "T") -> list[str]:
    width = max(3, len(str(n)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def synthetic_market(n_tickers: int = 50, n_weeks: int = 300, seed=0,
                     start: dt.date = DEFAULT_START, days_per_week: int = 5,
                     daily_vol: float = 0.015, market_vol: float = 0.008,
                     reversal: float = -0.1, rf_annual: float = 0.03,
                     delist_prob: float = 0.1, gap_prob: float = 0.002,
                     holiday_prob: float = 0.05, benchmark: str = "BENCH") -> MarketData:
    """Random universe with index churn, delistings and missing closes.

    Daily log returns are a common market factor plus idiosyncratic noise
    with weak weekly reversal. About ``delist_prob`` of the names stop trading
    part-way (often mid-week) and are replaced in the index by spare names,
    so the member count stays at ``n_tickers``. Individual closes go missing
    with probability ``gap_prob``. The benchmark is the equal-weight average
    of all names.
    """
    rng = np.random.default_rng(seed)
    calendar = _calendar(start, n_weeks, days_per_week, rng, holiday_prob)
    n_days = calendar.size
    n_delist = int(round(delist_prob * n_tickers))
    n_total = n_tickers + n_delist
    names = _tickers(n_total)

    market = rng.normal(0.0, market_vol, n_days)
    idio = rng.normal(0.0, daily_vol, (n_days, n_total))
    weeks = np.array([week_of(d) for d in calendar])
    # carry part of last week's idiosyncratic move into this week, reversed
    week_ids, week_pos = np.unique(weeks, return_inverse=True)
    weekly_idio = np.zeros((week_ids.size, n_total))
    np.add.at(weekly_idio, week_pos, idio)
    prev = np.vstack([np.zeros((1, n_total)), weekly_idio[:-1]])
    days_in_week = np.bincount(week_pos)
    idio = idio + reversal * prev[week_pos] / days_in_week[week_pos, None]
    log_ret = market[:, None] + idio
    prices = 50.0 * np.exp(np.cumsum(log_ret, axis=0))

    present = np.ones((n_days, n_total), dtype=bool)
    intervals: dict[str, list] = {}
    first_day = calendar[0].date()
    leavers = rng.choice(n_tickers, size=n_delist, replace=False) if n_delist else []
    for j, spare in zip(leavers, range(n_tickers, n_total)):
        cut = int(rng.integers(n_days // 5, n_days - n_days // 5))
        present[cut + 1:, j] = False
        exit_day = calendar[cut].date() + dt.timedelta(days=1)
        intervals[names[j]] = [(first_day, exit_day)]
        intervals[names[spare]] = [(exit_day, None)]
    for j in range(n_tickers):
        intervals.setdefault(names[j], [(first_day, None)])
    present &= rng.random((n_days, n_total)) >= gap_prob
    present[0, :] = True

    wide = pd.DataFrame(np.where(present, prices, np.nan), index=calendar, columns=names)
    wide[benchmark] = 100.0 * np.exp(np.cumsum(market + idio.mean(axis=1)))
    wide.columns.name = "ticker"
    wide = wide.sort_index(axis=1)
    table = PriceTable(wide, int(wide.notna().to_numpy().sum()))

    rf_days = [calendar[np.flatnonzero(weeks == w)[0]] for w in week_ids]
    rf = pd.Series(rf_annual + rng.normal(0.0, 0.002, len(rf_days)),
                   index=pd.DatetimeIndex(rf_days, name="date"))
    return MarketData(table, MembershipCalendar(intervals), RiskFreeSeries(rf), benchmark)


def trending_market(weekly_moves: dict[str, float], n_weeks: int = 20,
                    start: dt.date = DEFAULT_START, days_per_week: int = 5,
                    rf_annual: float = 0.0, benchmark: str = "BENCH",
                    benchmark_move: float = 0.0) -> MarketData:
    """Each ticker gains exactly ``weekly_moves[t]`` from the first to the last
    close of every week and is flat across weekends."""
    calendar = _calendar(start, n_weeks, days_per_week)
    weeks = np.array([week_of(d) for d in calendar])
    cols = {}
    moves = dict(weekly_moves)
    moves[benchmark] = benchmark_move
    for t, move in moves.items():
        price = np.empty(calendar.size)
        level = 100.0
        for w in np.unique(weeks):
            idx = np.flatnonzero(weeks == w)
            steps = np.linspace(0.0, 1.0, idx.size)
            price[idx] = level * (1.0 + move) ** steps
            level = price[idx[-1]]
        cols[t] = price
    wide = pd.DataFrame(cols, index=calendar).sort_index(axis=1)
    wide.columns.name = "ticker"
    first_day = calendar[0].date()
    membership = MembershipCalendar({t: [(first_day, None)] for t in weekly_moves})
    rf_days = [calendar[np.flatnonzero(weeks == w)[0]] for w in np.unique(weeks)]
    rf = pd.Series([rf_annual] * len(rf_days), index=pd.DatetimeIndex(rf_days, name="date"))
    return MarketData(PriceTable(wide, int(wide.notna().to_numpy().sum())), membership,
                      RiskFreeSeries(rf), benchmark)


def regime_returns(seed, n_weeks: int = 300, switch: int = 150, phi_trend: float = 0.6,
                   phi_whipsaw: float = -0.6, mean_trend: float = 0.004,
                   mean_whipsaw: float = -0.004, vol: float = 0.02,
                   bench_vol: float = 0.02):
    """Strategy and benchmark excess-return series with a regime change.

    The strategy is AR(1) around ``mean_trend`` with coefficient ``phi_trend``
    for the first ``switch`` weeks, then AR(1) around ``mean_whipsaw`` with
    ``phi_whipsaw``. The benchmark is i.i.d. Gaussian. Returns ``(strategy,
    benchmark)`` as arrays.
    """
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, vol, n_weeks)
    bench = rng.normal(0.0, bench_vol, n_weeks)
    x = np.empty(n_weeks)
    dev = eps[0] / np.sqrt(1.0 - phi_trend ** 2)
    for i in range(n_weeks):
        phi, mu = (phi_trend, mean_trend) if i < switch else (phi_whipsaw, mean_whipsaw)
        if i > 0:
            dev = phi * dev + eps[i]
        x[i] = mu + dev
    return x, bench


__all__ = ["synthetic_market", "trending_market", "regime_returns"]
