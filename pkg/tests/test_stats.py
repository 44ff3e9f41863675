import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from ssbarb.errors import InsufficientDataError
from ssbarb.series import ReturnSeries
from ssbarb.stats import CumulativeMode, cumulative_returns, summary_stats

# Published weekly excess-return statistics: (mean %, std %, t, sharpe)
TABLE = {
    ("SP500", "Winner"): (0.045, 3.350, 0.379, 0.013),
    ("SP500", "Loser"): (0.334, 3.973, 2.385, 0.084),
    ("SP500", "Contrarian"): (0.225, 3.097, 2.065, 0.073),
    ("SP500", "Benchmark"): (0.040, 2.368, 0.482, 0.017),
    ("KOSPI200", "Winner"): (-0.612, 4.189, -3.496, -0.146),
    ("KOSPI200", "Loser"): (0.796, 4.747, 4.013, 0.168),
    ("KOSPI200", "Contrarian"): (1.325, 3.349, 9.491, 0.396),
    ("KOSPI200", "Benchmark"): (0.136, 3.662, 0.889, 0.037),
}


def implied_n(mean, std, t):
    return (t * std / mean) ** 2


def test_matches_scipy_oracle():
    x = np.random.default_rng(3).standard_t(5, size=2000) * 0.02 + 0.001
    s = summary_stats(x)
    assert s.n == 2000
    assert s.mean == pytest.approx(np.mean(x), rel=1e-13)
    assert s.std == pytest.approx(np.std(x, ddof=1), rel=1e-13)
    assert s.skewness == pytest.approx(sps.skew(x), rel=1e-10)
    assert s.kurtosis == pytest.approx(sps.kurtosis(x, fisher=False), rel=1e-10)
    assert s.t_stat == pytest.approx(sps.ttest_1samp(x, 0.0).statistic, rel=1e-10)
    assert s.winning_pct == np.mean(x > 0)


def test_gaussian_calibration():
    s = summary_stats(np.random.default_rng(2024).standard_normal(1_000_000))
    assert abs(s.skewness) < 0.01
    assert abs(s.kurtosis - 3.0) < 0.03


@pytest.mark.parametrize("key", list(TABLE))
def test_published_sharpe_is_mean_over_std(key):
    mean, std, _, sharpe = TABLE[key]
    assert mean / std == pytest.approx(sharpe, abs=1e-3)


def test_published_t_implies_kospi_sample_size():
    mean, std, t, _ = TABLE[("KOSPI200", "Contrarian")]
    assert implied_n(mean, std, t) == pytest.approx(575, abs=2)


@pytest.mark.parametrize("market, tol", [("SP500", 0.03), ("KOSPI200", 0.02)])
def test_published_t_consistent_within_market(market, tol):
    # every row of one market shares the sample, so t / sharpe = sqrt(n) should agree
    ns = [implied_n(m, s, t) for (mk, _), (m, s, t, _) in TABLE.items() if mk == market]
    assert max(ns) / min(ns) - 1 < tol


def test_constant_series_contract():
    s = summary_stats(ReturnSeries.from_values([0.004] * 7))
    assert (s.mean, s.std, s.winning_pct) == (0.004, 0.0, 1.0)
    assert s.sharpe is None and s.t_stat is None
    assert s.skewness is None and s.kurtosis is None


def test_too_short():
    with pytest.raises(InsufficientDataError):
        summary_stats([0.01])


def test_winning_pct_excludes_zero():
    assert summary_stats([0.0, 0.01, -0.01, 0.02]).winning_pct == 0.5


def test_to_dict_field_names():
    d = summary_stats([0.01, 0.02, -0.01]).to_dict()
    assert list(d) == ["n", "mean", "std", "skewness", "kurtosis", "t_stat", "sharpe", "winning_pct"]


# keep away from subnormals, where halving underflows to zero
normal = st.floats(-0.3, 0.3, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-200)
samples = st.lists(normal, min_size=3, max_size=60).filter(
    lambda v: np.ptp(v) > 1e-6)


@settings(max_examples=150, deadline=None)
@given(samples, st.integers(-6, 6))
def test_power_of_two_scaling_is_exact(xs, e):
    x = np.array(xs)
    a, b = summary_stats(x), summary_stats(x * 2.0 ** e)
    assert b.mean == a.mean * 2.0 ** e and b.std == a.std * 2.0 ** e
    for f in ("skewness", "kurtosis", "t_stat", "sharpe", "winning_pct"):
        assert getattr(b, f) == getattr(a, f)


@settings(max_examples=150, deadline=None)
@given(samples, st.floats(0.01, 100.0))
def test_positive_scaling(xs, c):
    x = np.array(xs)
    a, b = summary_stats(x), summary_stats(x * c)
    assert b.mean == pytest.approx(c * a.mean, rel=1e-9, abs=1e-15)
    assert b.std == pytest.approx(c * a.std, rel=1e-9)
    for f in ("skewness", "kurtosis", "sharpe", "t_stat"):
        assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-7, abs=1e-9)
    assert b.winning_pct == a.winning_pct


@settings(max_examples=150, deadline=None)
@given(samples)
def test_t_identity(xs):
    s = summary_stats(xs)
    if s.mean != 0:
        assert s.t_stat * s.std / (s.mean * math.sqrt(s.n)) == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------- cumulative

def test_cumulative_examples():
    s = ReturnSeries.from_values([0.1, 0.1], start=5)
    summed = cumulative_returns(s)
    assert summed.values.tolist() == pytest.approx([0.1, 0.2], rel=1e-15)
    assert summed.periods.tolist() == [5, 6]
    comp = cumulative_returns(s, CumulativeMode.Compound)
    assert comp.values.tolist() == pytest.approx([0.1, 0.21], rel=1e-14)


def test_cumulative_trivial():
    z = ReturnSeries.from_values([0.0] * 4)
    for mode in CumulativeMode:
        assert np.all(cumulative_returns(z, mode).values == 0.0)
        assert cumulative_returns(ReturnSeries.from_values([-0.03]), mode).values.tolist() == [-0.03]
    with pytest.raises(InsufficientDataError):
        cumulative_returns(ReturnSeries.from_values([]))
