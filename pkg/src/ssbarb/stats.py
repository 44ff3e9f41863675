"""Performance statistics of a per-period return series.

Conventions: sample std (n - 1), standardized moments for skewness and raw
(non-excess) kurtosis so a Gaussian gives 3, Sharpe is mean/std per period
without annualization, and the t-statistic tests a zero mean.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientDataError
from .series import ReturnSeries

FIELDS = ("n", "mean", "std", "skewness", "kurtosis", "t_stat", "sharpe", "winning_pct")


class CumulativeMode(enum.Enum):
    Sum = "Sum"
    Compound = "Compound"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    std: float
    skewness: Optional[float]
    kurtosis: Optional[float]
    t_stat: Optional[float]
    sharpe: Optional[float]
    winning_pct: float

    def to_dict(self) -> dict:
        return asdict(self)


def summary_stats(series) -> SummaryStats:
    """Table-style summary of ``series`` (a ReturnSeries or array of returns).

    Fields that need a nonzero spread (skewness, kurtosis, t_stat, sharpe)
    are ``None`` for a constant series.
    """
    x = series.values if isinstance(series, ReturnSeries) else np.asarray(series, dtype=np.float64)
    n = int(x.size)
    if n < 2:
        raise InsufficientDataError(f"summary statistics need at least 2 observations, got {n}")
    winning = float(np.count_nonzero(x > 0)) / n
    if np.all(x == x[0]):
        # np.mean of a constant can be off by an ulp and fake a tiny spread
        return SummaryStats(n, float(x[0]), 0.0, None, None, None, None, winning)
    mean = float(np.mean(x))
    dev = x - mean
    m2 = float(np.mean(dev * dev))
    std = math.sqrt(m2 * n / (n - 1))
    skew = float(np.mean(dev ** 3)) / (m2 * math.sqrt(m2))
    kurt = float(np.mean(dev ** 4)) / (m2 * m2)
    sharpe = mean / std
    t_stat = sharpe * math.sqrt(n)
    return SummaryStats(n, mean, std, skew, kurt, t_stat, sharpe, winning)


def cumulative_returns(series: ReturnSeries, mode: CumulativeMode = CumulativeMode.Sum) -> ReturnSeries:
    mode = CumulativeMode(mode)
    if len(series) == 0:
        raise InsufficientDataError("cumulative returns of an empty series")
    if mode is CumulativeMode.Sum:
        curve = np.cumsum(series.values)
    else:
        # c_i = c_{i-1} + r_i (1 + c_{i-1}): exact at the first step, no 1 + r rounding
        curve = np.empty(len(series))
        c = 0.0
        for i, r in enumerate(series.values.tolist()):
            c = c + r * (1.0 + c)
            curve[i] = c
    return ReturnSeries(series.periods, curve)
