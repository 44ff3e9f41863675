"""
Point-in-time market data: closing prices, index membership, risk-free rates.

File formats (UTF-8, comma separated, one header row; rows are rejected,
never repaired):

    prices.csv      date,ticker,close            ISO-8601 date, adjusted close > 0
    membership.csv  ticker,enter_date,exit_date  half-open [enter, exit); empty exit = open
    riskfree.csv    date,annual_rate             decimal annualized rate

Weeks are ISO weeks (Monday to Sunday) numbered consecutively from the week
of 1970-01-05. The trading calendar is the set of dates present in the price
table; a week's first/last trading day is its first/last calendar date.
Closes are assumed split- and dividend-adjusted.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from .errors import CoverageError, DataError, DuplicateRowError, ParseError
from .series import ReturnSeries

logger = logging.getLogger(__name__)

EPOCH_MONDAY = dt.date(1970, 1, 5)
WEEKS_PER_YEAR = 52

PRICE_HEADER = ("date", "ticker", "close")
MEMBERSHIP_HEADER = ("ticker", "enter_date", "exit_date")
RISKFREE_HEADER = ("date", "annual_rate")


def week_of(day: dt.date) -> int:
    """ISO-week number of ``day`` counted from the week of 1970-01-05."""
    if isinstance(day, (pd.Timestamp, dt.datetime)):
        day = day.date()
    return (day - EPOCH_MONDAY).days // 7


def week_start(week: int) -> dt.date:
    return EPOCH_MONDAY + dt.timedelta(weeks=int(week))


def annual_to_weekly(annual_rate: float) -> float:
    """Per-week rate equivalent to a compounded annual rate."""
    return (1.0 + annual_rate) ** (1.0 / WEEKS_PER_YEAR) - 1.0


def _open_source(source):
    if hasattr(source, "read"):
        return source, getattr(source, "name", None), False
    path = Path(source)
    return path.open(newline="", encoding="utf-8"), str(path), True


def _read_rows(source, header: tuple[str, ...]):
    """Yield ``(line_number, fields, source_name)`` after checking the header."""
    fh, name, owned = _open_source(source)
    try:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise ParseError(f"missing header {','.join(header)}", line=1, source=name)
        if first and first[0].startswith("\ufeff"):
            first[0] = first[0][1:]
        if tuple(h.strip() for h in first) != header:
            raise ParseError(f"expected header {','.join(header)}, got {','.join(first)}",
                             line=1, source=name)
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                                 line=reader.line_num, source=name)
            yield reader.line_num, [f.strip() for f in row], name
    finally:
        if owned:
            fh.close()


def _parse_date(text: str, line: int, name) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad date {text!r}", line=line, source=name) from None


def _parse_float(text: str, what: str, line: int, name) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", line=line, source=name) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {text!r}", line=line, source=name)
    return value


# ---------------------------------------------------------------- prices

@dataclass(frozen=True, eq=False)
class PriceTable:
    """Closing prices as a date x ticker frame (NaN where a ticker has no close).

    The index is the trading calendar (sorted ``datetime64`` dates), columns
    are tickers in lexicographic order.
    """

    wide: pd.DataFrame
    n_rows: int = 0

    @classmethod
    def from_records(cls, records: Iterable[tuple]) -> "PriceTable":
        """Build from ``(date, ticker, close)`` tuples (validated like file rows)."""
        seen = set()
        rows = []
        for n, (day, ticker, close) in enumerate(records, start=1):
            if isinstance(day, str):
                day = dt.date.fromisoformat(day)
            close = float(close)
            if not (math.isfinite(close) and close > 0):
                raise ParseError(f"close must be positive, got {close!r}", line=n)
            if (day, ticker) in seen:
                raise DuplicateRowError(f"duplicate ({day}, {ticker})", line=n)
            seen.add((day, ticker))
            rows.append((day, ticker, close))
        return cls._from_rows(rows)

    @classmethod
    def _from_rows(cls, rows) -> "PriceTable":
        if not rows:
            wide = pd.DataFrame(index=pd.DatetimeIndex([], name="date"), dtype=np.float64)
            wide.columns.name = "ticker"
            return cls(wide, 0)
        frame = pd.DataFrame(rows, columns=list(PRICE_HEADER))
        frame["date"] = pd.to_datetime(frame["date"])
        wide = frame.pivot(index="date", columns="ticker", values="close")
        wide = wide.sort_index().sort_index(axis=1)
        return cls(wide.astype(np.float64), len(rows))

    @property
    def calendar(self) -> pd.DatetimeIndex:
        return self.wide.index

    @property
    def tickers(self) -> list[str]:
        return list(self.wide.columns)

    def __len__(self):
        return int(self.wide.notna().to_numpy().sum())

    def series(self, ticker: str) -> pd.Series:
        return self.wide[ticker].dropna()

    def truncate(self, last_date) -> "PriceTable":
        """Prices dated on or before ``last_date`` (tickers with no rows left are dropped)."""
        wide = self.wide.loc[:pd.Timestamp(last_date)]
        wide = wide.dropna(axis=1, how="all")
        return PriceTable(wide, int(wide.notna().to_numpy().sum()))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PRICE_HEADER)
        stacked = self.wide.stack().sort_index()
        for (day, ticker), close in stacked.items():
            writer.writerow((day.date().isoformat(), ticker, repr(float(close))))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def load_prices(source) -> PriceTable:
    rows = []
    seen = {}
    for line, (d, ticker, close), name in _read_rows(source, PRICE_HEADER):
        day = _parse_date(d, line, name)
        if not ticker:
            raise ParseError("empty ticker", line=line, source=name)
        value = _parse_float(close, "close", line, name)
        if value <= 0:
            raise ParseError(f"close must be positive, got {close}", line=line, source=name)
        key = (day, ticker)
        if key in seen:
            raise DuplicateRowError(f"duplicate ({day}, {ticker}), first seen on line {seen[key]}",
                                    line=line, source=name)
        seen[key] = line
        rows.append((day, ticker, value))
    table = PriceTable._from_rows(rows)
    logger.info("loaded %d price rows, %d tickers, %d dates",
                table.n_rows, len(table.tickers), len(table.calendar))
    return table


# ------------------------------------------------------------ membership

@dataclass(frozen=True)
class MembershipCalendar:
    """Per-ticker half-open membership intervals ``[enter, exit)``; ``exit=None`` is open."""

    intervals: Mapping[str, tuple[tuple[dt.date, Optional[dt.date]], ...]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for ticker, spans in self.intervals.items():
            spans = tuple(sorted(((_as_date(a), _as_date(b) if b is not None else None)
                                  for a, b in spans), key=lambda s: s[0]))
            for enter, exit_ in spans:
                if exit_ is not None and exit_ <= enter:
                    raise DataError(f"{ticker}: exit {exit_} not after enter {enter}")
            for (a0, b0), (a1, _) in zip(spans, spans[1:]):
                if b0 is None or b0 > a1:
                    raise DataError(f"{ticker}: overlapping membership intervals at {a1}")
            clean[ticker] = spans
        object.__setattr__(self, "intervals", dict(sorted(clean.items())))

    @property
    def tickers(self) -> list[str]:
        return list(self.intervals)

    def is_member(self, ticker: str, day) -> bool:
        day = _as_date(day)
        for enter, exit_ in self.intervals.get(ticker, ()):
            if enter <= day and (exit_ is None or day < exit_):
                return True
        return False

    def members_at(self, day) -> list[str]:
        day = _as_date(day)
        return [t for t in self.intervals if self.is_member(t, day)]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MEMBERSHIP_HEADER)
        for ticker, spans in self.intervals.items():
            for enter, exit_ in spans:
                writer.writerow((ticker, enter.isoformat(), exit_.isoformat() if exit_ else ""))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _as_date(day) -> dt.date:
    if isinstance(day, pd.Timestamp):
        return day.date()
    if isinstance(day, dt.datetime):
        return day.date()
    if isinstance(day, str):
        return dt.date.fromisoformat(day)
    if isinstance(day, np.datetime64):
        return pd.Timestamp(day).date()
    return day


def load_membership(source) -> MembershipCalendar:
    spans: dict[str, list] = {}
    for line, (ticker, enter, exit_), name in _read_rows(source, MEMBERSHIP_HEADER):
        if not ticker:
            raise ParseError("empty ticker", line=line, source=name)
        a = _parse_date(enter, line, name)
        b = _parse_date(exit_, line, name) if exit_ else None
        if b is not None and b <= a:
            raise ParseError(f"exit_date {b} not after enter_date {a}", line=line, source=name)
        spans.setdefault(ticker, []).append((a, b))
    try:
        return MembershipCalendar(spans)
    except DataError as exc:
        raise ParseError(str(exc), source=str(source) if not hasattr(source, "read") else None) from None


# ------------------------------------------------------------- risk free

@dataclass(frozen=True, eq=False)
class RiskFreeSeries:
    """Quoted annual rates by date, and the per-week rate of each ISO week.

    A week's rate comes from the earliest quote dated inside that week,
    converted with ``(1 + annual)**(1/52) - 1``.
    """

    quotes: pd.Series  # annual rate indexed by date

    @classmethod
    def constant_weekly(cls, weekly_rate: float, weeks: Iterable[int]) -> "RiskFreeSeries":
        annual = (1.0 + weekly_rate) ** WEEKS_PER_YEAR - 1.0
        days = [pd.Timestamp(week_start(w)) for w in sorted(set(int(w) for w in weeks))]
        return cls(pd.Series([annual] * len(days), index=pd.DatetimeIndex(days), dtype=np.float64))

    @cached_property
    def weekly(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for day, rate in self.quotes.sort_index().items():
            w = week_of(day)
            if w not in out:
                out[w] = annual_to_weekly(float(rate))
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RISKFREE_HEADER)
        for day, rate in self.quotes.sort_index().items():
            writer.writerow((day.date().isoformat(), repr(float(rate))))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def rate_for_week(self, week: int) -> float:
        try:
            return self.weekly[int(week)]
        except KeyError:
            raise CoverageError(
                f"no risk-free quote for week {week} (starting {week_start(week)})") from None


def load_risk_free(source) -> RiskFreeSeries:
    days, rates, seen = [], [], set()
    for line, (d, rate), name in _read_rows(source, RISKFREE_HEADER):
        day = _parse_date(d, line, name)
        if day in seen:
            raise DuplicateRowError(f"duplicate date {day}", line=line, source=name)
        seen.add(day)
        value = _parse_float(rate, "annual_rate", line, name)
        if value <= -1:
            raise ParseError(f"annual_rate must exceed -1, got {rate}", line=line, source=name)
        days.append(pd.Timestamp(day))
        rates.append(value)
    quotes = pd.Series(rates, index=pd.DatetimeIndex(days, name="date"), dtype=np.float64)
    return RiskFreeSeries(quotes.sort_index())


# --------------------------------------------------------- weekly bars

@dataclass(frozen=True, eq=False)
class WeeklyBars:
    """First- and last-trading-day closes per ISO week.

    ``first``/``last`` are week x ticker frames; ``first_date``/``last_date``
    give the calendar dates of those closes. ``first_available`` and
    ``last_available`` hold each ticker's first/last close actually printed
    within the week (which may differ from the first/last trading day).
    """

    weeks: np.ndarray
    first_date: pd.Series
    last_date: pd.Series
    first: pd.DataFrame
    last: pd.DataFrame
    first_available: pd.DataFrame
    last_available: pd.DataFrame

    def position(self, week: int) -> int:
        pos = int(np.searchsorted(self.weeks, week))
        if pos >= self.weeks.size or self.weeks[pos] != week:
            raise KeyError(f"week {week} has no trading days")
        return pos


def weekly_bars(prices: PriceTable) -> WeeklyBars:
    wide = prices.wide
    week_numbers = np.array([week_of(d) for d in wide.index], dtype=np.int64)
    keys = pd.Index(week_numbers, name="week")
    grouped = wide.groupby(keys, sort=True)
    dates = pd.Series(wide.index, index=keys)
    first_date = dates.groupby(level=0).min()
    last_date = dates.groupby(level=0).max()
    first = wide.loc[first_date.to_numpy()].set_axis(first_date.index, axis=0)
    last = wide.loc[last_date.to_numpy()].set_axis(last_date.index, axis=0)
    # GroupBy.first/last skip NaN: the closes actually printed in the week
    first_available = grouped.first()
    last_available = grouped.last()
    return WeeklyBars(
        weeks=first_date.index.to_numpy(dtype=np.int64),
        first_date=first_date,
        last_date=last_date,
        first=first,
        last=last,
        first_available=first_available.reindex(columns=wide.columns),
        last_available=last_available.reindex(columns=wide.columns),
    )


def weekly_returns(prices: PriceTable, tickers: Optional[Iterable[str]] = None,
                   weeks: Optional[tuple[int, int]] = None, convention: str = "first_last",
                   bars: Optional[WeeklyBars] = None) -> pd.DataFrame:
    """Simple weekly returns, week x ticker, NaN marking a missing close.

    ``first_last`` uses the closes of the first and last trading day of each
    week (the position opened at the first close and liquidated at the last).
    ``close_to_close`` uses the previous trading week's last close instead of
    the first close, so the returns compound to the overall price ratio.
    ``weeks`` is an inclusive ``(first_week, last_week)`` range.
    """
    bars = bars if bars is not None else weekly_bars(prices)
    if convention == "first_last":
        ret = bars.last / bars.first - 1.0
    elif convention == "close_to_close":
        ret = bars.last / bars.last.shift(1) - 1.0
    else:
        raise ValueError(f"unknown convention {convention!r}")
    if tickers is not None:
        ret = ret.reindex(columns=list(tickers))
    if weeks is not None:
        lo, hi = weeks
        ret = ret.loc[(ret.index >= lo) & (ret.index <= hi)]
    missing = int(ret.isna().to_numpy().sum())
    if missing:
        logger.debug("%d missing ticker-weeks in weekly returns", missing)
    return ret


def universe_at(membership: MembershipCalendar, prices: PriceTable, day,
                required_dates: Iterable = ()) -> list[str]:
    """Index members on ``day`` that have a close on every ``required_dates`` date.

    Membership uses half-open intervals, so a ticker leaving on ``day`` is
    excluded. Pass only dates on or before ``day`` to keep the query point-in-time.
    """
    members = membership.members_at(day)
    required = [pd.Timestamp(d) for d in required_dates]
    if not required:
        return members
    wide = prices.wide
    out = []
    for ticker in members:
        if ticker not in wide.columns:
            continue
        col = wide[ticker]
        ok = True
        for d in required:
            if d not in col.index or not np.isfinite(col.at[d]):
                ok = False
                break
        if ok:
            out.append(ticker)
    return out


def excess_returns(series: ReturnSeries, rf: RiskFreeSeries) -> ReturnSeries:
    """Per-week return minus the week's risk-free rate (periods are week numbers)."""
    weekly = rf.weekly
    missing = [int(p) for p in series.periods if int(p) not in weekly]
    if missing:
        raise CoverageError(
            f"no risk-free rate for week {missing[0]} (starting {week_start(missing[0])})"
            + (f" and {len(missing) - 1} more" if len(missing) > 1 else ""))
    rates = np.array([weekly[int(p)] for p in series.periods], dtype=np.float64)
    return ReturnSeries(series.periods, series.values - rates)


@dataclass(frozen=True, eq=False)
class MarketData:
    """Everything a backtest reads. ``benchmark`` names a ticker in ``prices``."""

    prices: PriceTable
    membership: MembershipCalendar
    risk_free: RiskFreeSeries
    benchmark: str

    def __post_init__(self):
        if self.benchmark not in self.prices.wide.columns:
            raise DataError(f"benchmark ticker {self.benchmark!r} has no prices")

    def truncate(self, last_date) -> "MarketData":
        """Data as it would have been known at the close of ``last_date``."""
        last = pd.Timestamp(last_date)
        rf = self.risk_free.quotes.loc[:last]
        return MarketData(self.prices.truncate(last), self.membership,
                          RiskFreeSeries(rf), self.benchmark)


def save_market_data(data: MarketData, directory) -> dict[str, Path]:
    """Write ``prices.csv``, ``membership.csv`` and ``riskfree.csv`` into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("prices", "membership", "riskfree")}
    data.prices.to_csv(paths["prices"])
    data.membership.to_csv(paths["membership"])
    data.risk_free.to_csv(paths["riskfree"])
    return paths


def load_market_data(prices, membership, risk_free, benchmark: str) -> MarketData:
    return MarketData(load_prices(prices), load_membership(membership),
                      load_risk_free(risk_free), benchmark)
