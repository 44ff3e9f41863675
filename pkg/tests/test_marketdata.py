import datetime as dt
import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from ssbarb.errors import CoverageError, DataError, DuplicateRowError, ParseError
from ssbarb.marketdata import (
    MembershipCalendar,
    PriceTable,
    RiskFreeSeries,
    annual_to_weekly,
    excess_returns,
    load_membership,
    load_prices,
    load_risk_free,
    universe_at,
    week_of,
    week_start,
    weekly_bars,
    weekly_returns,
)
from ssbarb.series import ReturnSeries
from ssbarb.synthetic import synthetic_market


def csv(text):
    return io.StringIO(text)


# ---------------------------------------------------------------- calendar helpers

def test_weeks_start_on_monday():
    assert week_of(dt.date(1970, 1, 5)) == 0
    assert week_of(dt.date(1970, 1, 11)) == 0
    assert week_of(dt.date(1970, 1, 12)) == 1
    assert week_start(week_of(dt.date(2024, 2, 29))) == dt.date(2024, 2, 26)
    assert week_of(pd.Timestamp("2024-03-03")) == week_of(dt.date(2024, 2, 26))


def test_annual_to_weekly_compounds_back():
    w = annual_to_weekly(0.05)
    assert (1 + w) ** 52 == pytest.approx(1.05, rel=1e-14)
    assert annual_to_weekly(0.0) == 0.0


# ---------------------------------------------------------------- loaders

def test_header_only_prices_is_empty():
    table = load_prices(csv("date,ticker,close\n"))
    assert table.n_rows == 0 and len(table) == 0 and table.tickers == []


def test_bom_and_blank_lines_accepted():
    table = load_prices(csv("﻿date,ticker,close\n2020-01-06,A,1.5\n\n"))
    assert table.n_rows == 1


@pytest.mark.parametrize("close", ["0", "-3.2", "nan", "inf", "abc"])
def test_bad_close_names_line(close):
    text = f"date,ticker,close\n2020-01-06,A,10\n2020-01-07,A,{close}\n"
    with pytest.raises(ParseError) as err:
        load_prices(csv(text))
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_bad_date_and_field_count():
    with pytest.raises(ParseError) as err:
        load_prices(csv("date,ticker,close\n2020-13-01,A,1\n"))
    assert err.value.line == 2
    with pytest.raises(ParseError):
        load_prices(csv("date,ticker,close\n2020-01-06,A\n"))


def test_wrong_header():
    with pytest.raises(ParseError):
        load_prices(csv("day,ticker,close\n"))
    with pytest.raises(ParseError):
        load_prices(csv(""))


def test_duplicate_row_rejected():
    text = "date,ticker,close\n2020-01-06,A,1\n2020-01-06,B,2\n2020-01-06,A,3\n"
    with pytest.raises(DuplicateRowError) as err:
        load_prices(csv(text))
    assert err.value.line == 4
    assert isinstance(err.value, DataError)


def test_load_from_path(tmp_path):
    p = tmp_path / "prices.csv"
    p.write_text("date,ticker,close\n2020-01-06,A,10\n", encoding="utf-8")
    assert load_prices(p).n_rows == 1


def test_membership_loader():
    cal = load_membership(csv("ticker,enter_date,exit_date\nA,2020-01-01,2020-06-01\n"
                              "A,2020-07-01,\nB,2020-03-01,\n"))
    assert cal.is_member("A", "2020-05-31")
    assert not cal.is_member("A", "2020-06-15")
    assert cal.is_member("A", "2030-01-01")
    with pytest.raises(ParseError):
        load_membership(csv("ticker,enter_date,exit_date\nA,2020-01-01,2020-01-01\n"))
    with pytest.raises(ParseError):
        load_membership(csv("ticker,enter_date,exit_date\nA,2020-01-01,\nA,2020-03-01,2020-04-01\n"))


def test_membership_overlap_rejected():
    with pytest.raises(DataError):
        MembershipCalendar({"A": [("2020-01-01", "2020-03-01"), ("2020-02-01", None)]})


def test_risk_free_loader_uses_first_quote_of_week():
    rf = load_risk_free(csv("date,annual_rate\n2020-01-08,0.04\n2020-01-06,0.02\n2020-01-13,0.03\n"))
    w = week_of(dt.date(2020, 1, 6))
    assert rf.rate_for_week(w) == annual_to_weekly(0.02)
    assert rf.rate_for_week(w + 1) == annual_to_weekly(0.03)
    with pytest.raises(CoverageError):
        rf.rate_for_week(w + 2)
    with pytest.raises(DuplicateRowError):
        load_risk_free(csv("date,annual_rate\n2020-01-06,0.02\n2020-01-06,0.02\n"))


# ---------------------------------------------------------------- weekly returns

def test_two_row_fixture_gives_ten_percent():
    table = load_prices(csv("date,ticker,close\n2020-01-07,A,100\n2020-01-10,A,110\n"))
    ret = weekly_returns(table)
    assert ret.shape == (1, 1)
    assert ret.iloc[0, 0] == pytest.approx(0.10, rel=1e-14)


def test_flat_price_gives_zero():
    table = PriceTable.from_records([("2020-01-06", "A", 7.0), ("2020-01-08", "A", 7.0)])
    assert weekly_returns(table).iloc[0, 0] == 0.0


def test_mid_week_delisting_is_missing():
    table = PriceTable.from_records([
        ("2020-01-06", "A", 10.0), ("2020-01-10", "A", 11.0),
        ("2020-01-06", "B", 10.0), ("2020-01-08", "B", 9.0),
    ])
    ret = weekly_returns(table)
    assert ret.loc[:, "A"].iloc[0] == pytest.approx(0.1)
    assert np.isnan(ret.loc[:, "B"].iloc[0])
    bars = weekly_bars(table)
    assert bars.last_available["B"].iloc[0] == 9.0


def test_week_range_and_ticker_filter():
    md = synthetic_market(n_tickers=5, n_weeks=10, seed=1, delist_prob=0.0, gap_prob=0.0)
    ret = weekly_returns(md.prices, tickers=["T001", "T003"])
    lo, hi = int(ret.index[2]), int(ret.index[5])
    sub = weekly_returns(md.prices, tickers=["T003"], weeks=(lo, hi))
    assert sub.index.tolist() == list(range(lo, hi + 1))
    assert sub.columns.tolist() == ["T003"]


def test_first_last_dates_inside_week():
    md = synthetic_market(n_tickers=5, n_weeks=30, seed=2)
    bars = weekly_bars(md.prices)
    for w in bars.weeks:
        first, last = bars.first_date[w], bars.last_date[w]
        assert first <= last
        assert week_of(first) == w == week_of(last)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_close_to_close_conserves_price_ratio(seed):
    md = synthetic_market(n_tickers=4, n_weeks=25, seed=seed, delist_prob=0.0, gap_prob=0.0)
    ret = weekly_returns(md.prices, convention="close_to_close")
    bars = weekly_bars(md.prices)
    for t in md.prices.tickers:
        growth = np.prod(1.0 + ret[t].to_numpy()[1:])
        ratio = bars.last[t].iloc[-1] / bars.last[t].iloc[0]
        assert growth == pytest.approx(ratio, rel=1e-12)


def test_unknown_convention():
    table = PriceTable.from_records([("2020-01-06", "A", 7.0)])
    with pytest.raises(ValueError):
        weekly_returns(table, convention="log")


# ---------------------------------------------------------------- universe

@pytest.fixture
def three_names():
    cal = MembershipCalendar({
        "A": [("2020-01-06", None)],
        "B": [("2020-01-06", "2020-01-22")],
        "C": [("2020-01-06", None)],
    })
    days = pd.bdate_range("2020-01-06", "2020-01-31")
    records = [(d.date(), t, 10.0 + i) for i, d in enumerate(days) for t in "AC"]
    records += [(d.date(), "B", 20.0) for d in days if d < pd.Timestamp("2020-01-22")]
    return cal, PriceTable.from_records(records)


def test_universe_before_all_memberships(three_names):
    cal, prices = three_names
    assert universe_at(cal, prices, "2019-12-31") == []


def test_universe_drops_at_exit(three_names):
    cal, prices = three_names
    assert universe_at(cal, prices, "2020-01-21") == ["A", "B", "C"]
    assert universe_at(cal, prices, "2020-01-22") == ["A", "C"]


def test_universe_requires_price_history(three_names):
    cal, prices = three_names
    assert universe_at(cal, prices, "2020-01-21", required_dates=["2020-01-03"]) == []
    assert universe_at(cal, prices, "2020-01-21", required_dates=["2020-01-10"]) == ["A", "B", "C"]


def test_universe_is_point_in_time(three_names):
    cal, prices = three_names
    day = pd.Timestamp("2020-01-15")
    req = [pd.Timestamp("2020-01-13"), day]
    assert universe_at(cal, prices, day, req) == universe_at(cal, prices.truncate(day), day, req)


# ---------------------------------------------------------------- excess returns

def test_excess_return_arithmetic():
    rf = RiskFreeSeries.constant_weekly(0.001, [2600])
    out = excess_returns(ReturnSeries([2600], [0.010]), rf)
    assert out.values[0] == pytest.approx(0.009, rel=1e-12)


def test_zero_rate_is_identity():
    s = ReturnSeries.from_values([0.01, -0.02, 0.03], start=100)
    rf = RiskFreeSeries.constant_weekly(0.0, range(100, 103))
    assert excess_returns(s, rf) == s


def test_missing_week_names_the_week():
    s = ReturnSeries.from_values([0.01, -0.02, 0.03], start=100)
    rf = RiskFreeSeries.constant_weekly(0.0, [100, 102])
    with pytest.raises(CoverageError, match="week 101"):
        excess_returns(s, rf)


# ---------------------------------------------------------------- round trip

def test_price_table_round_trip():
    md = synthetic_market(n_tickers=8, n_weeks=20, seed=4)
    text = md.prices.to_csv()
    back = load_prices(csv(text))
    assert back.tickers == md.prices.tickers
    pd.testing.assert_frame_equal(back.wide, md.prices.wide.dropna(how="all"),
                                  check_exact=True, check_freq=False)
    assert back.to_csv() == text
