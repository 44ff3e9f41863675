"""
One-step-ahead forecasts of the speed of adjustment from return history.

Dropping the cubic term, the discrete map is an AR(1) with coefficient
``1 - lambda``. Averaging lag products over a moving window of ``k`` periods
gives the forecast for period ``i + 1``:

    CurrentDenominator : 1 - <r_i r_{i-1}>_k / <r_i^2>_k
    LaggedDenominator  : 1 - <r_i r_{i-1}>_k / <r_{i-1}^2>_k
    CovarianceBased    : 1 - corr_k(r_i, r_{i-1})

where ``<X_i>_k = (1/k) sum_{j=0}^{k-1} X_{i-j}``. The product window holds
``k`` products and therefore needs ``k + 1`` returns. Only returns at
positions ``<= i`` enter a forecast.

The cubic term is ignored, so forecasts carry a bias of order ``r**2 / r_c**2``;
it is not corrected here.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DegenerateWindowError, InsufficientHistoryError
from .series import ReturnSeries

logger = logging.getLogger(__name__)

MIN_WINDOW = 2
CHUNK_ELEMENTS = 1 << 22


class EstimatorKind(enum.Enum):
    CurrentDenominator = "CurrentDenominator"
    LaggedDenominator = "LaggedDenominator"
    CovarianceBased = "CovarianceBased"

    def __str__(self):
        return self.value


class RhoMode(enum.Enum):
    WindowMean = "WindowMean"
    PreviousReturn = "PreviousReturn"

    def __str__(self):
        return self.value


def check_window(k) -> int:
    if (isinstance(k, bool) or not isinstance(k, (int, float, np.integer))
            or not np.isfinite(k) or int(k) != k or k < MIN_WINDOW):
        raise ConfigError(f"moving-average window k must be an integer >= {MIN_WINDOW}, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class LambdaForecast:
    target: int
    value: float
    k: int
    kind: EstimatorKind


def _values(series) -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.values
    return np.asarray(series, dtype=np.float64)


def _position(series, i: int) -> int:
    if isinstance(series, ReturnSeries):
        try:
            return series.position(i)
        except KeyError:
            raise InsufficientHistoryError(f"period {i} is not in the series") from None
    n = len(series)
    if not 0 <= i < n:
        raise InsufficientHistoryError(f"index {i} outside series of length {n}")
    return int(i)


def moving_average(values, k: int, i: int) -> float:
    """Mean of the ``k`` values ending at position ``i`` (inclusive)."""
    k = check_window(k)
    x = _values(values)
    pos = _position(values, i)
    if pos + 1 < k:
        raise InsufficientHistoryError(
            f"moving average over k={k} needs {k} values up to index {i}, have {pos + 1}")
    return float(np.mean(x[pos - k + 1:pos + 1]))


def _window_ratios(cur: np.ndarray, lag: np.ndarray, kind: EstimatorKind):
    """Lag-1 ratio per window row; ``cur``/``lag`` are (n_windows, k) views.

    Returns ``(ratio, degenerate)``; degenerate rows have a zero denominator.
    """
    if kind is EstimatorKind.CovarianceBased:
        dc = cur - cur.mean(axis=1, keepdims=True)
        dl = lag - lag.mean(axis=1, keepdims=True)
        num = (dc * dl).mean(axis=1)
        den = np.sqrt((dc * dc).mean(axis=1) * (dl * dl).mean(axis=1))
    else:
        num = (cur * lag).mean(axis=1)
        base = cur if kind is EstimatorKind.CurrentDenominator else lag
        den = (base * base).mean(axis=1)
    degenerate = ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(degenerate, np.nan, num / np.where(degenerate, 1.0, den))
    return ratio, degenerate


def estimate_lambda(series, k: int, kind: EstimatorKind = EstimatorKind.CurrentDenominator,
                    i: int | None = None) -> LambdaForecast:
    """Forecast lambda for period ``i + 1`` from returns up to ``i``.

    ``i`` is a period of ``series`` (or a position, for plain arrays);
    defaults to the last one.
    """
    k = check_window(k)
    kind = EstimatorKind(kind)
    x = _values(series)
    if i is None:
        if x.size == 0:
            raise InsufficientHistoryError("empty series")
        i = int(series.periods[-1]) if isinstance(series, ReturnSeries) else x.size - 1
    pos = _position(series, i)
    if pos < k:
        raise InsufficientHistoryError(
            f"estimator with k={k} needs {k + 1} returns up to index {i}, have {pos + 1}")
    cur = x[pos - k + 1:pos + 1][None, :]
    lag = x[pos - k:pos][None, :]
    ratio, degenerate = _window_ratios(cur, lag, kind)
    if degenerate[0]:
        raise DegenerateWindowError(f"zero denominator in window ending at {i} (k={k}, {kind})")
    return LambdaForecast(target=int(i) + 1, value=float(1.0 - ratio[0]), k=k, kind=kind)


@dataclass(frozen=True, eq=False)
class LambdaSeries:
    """Forecasts for every feasible target period.

    ``values`` is NaN where the window was degenerate.
    """

    targets: np.ndarray
    values: np.ndarray
    k: int
    kind: EstimatorKind

    def __len__(self):
        return int(self.targets.size)

    def __iter__(self) -> Iterator[LambdaForecast]:
        for t, v in zip(self.targets.tolist(), self.values.tolist()):
            yield LambdaForecast(t, v, self.k, self.kind)

    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("period", "lambda_hat", "k", "kind"))
        for t, v in zip(self.targets.tolist(), self.values.tolist()):
            writer.writerow((t, repr(v), self.k, self.kind.value))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def lambda_series(series, k: int,
                  kind: EstimatorKind = EstimatorKind.CurrentDenominator) -> LambdaSeries:
    """All one-step-ahead forecasts of a series.

    The first ``k`` returns only seed the window, so a series of length
    ``k + 1`` yields exactly one forecast. Target periods are
    ``period + 1`` of the last return in each window.
    """
    k = check_window(k)
    kind = EstimatorKind(kind)
    x = _values(series)
    if x.size < k + 1:
        raise InsufficientHistoryError(
            f"series of length {x.size} too short for k={k} (need >= {k + 1})")
    if isinstance(series, ReturnSeries):
        periods = series.periods
    else:
        periods = np.arange(x.size, dtype=np.int64)
    cur = sliding_window_view(x[1:], k)
    lag = sliding_window_view(x[:-1], k)
    # bound the temporaries of the covariance kind to ~CHUNK_ELEMENTS floats
    rows = max(1, CHUNK_ELEMENTS // k)
    parts = [_window_ratios(cur[s:s + rows], lag[s:s + rows], kind)
             for s in range(0, cur.shape[0], rows)]
    ratio = np.concatenate([p[0] for p in parts])
    degenerate = np.concatenate([p[1] for p in parts])
    targets = periods[k:] + 1
    if degenerate.any():
        logger.info("%d degenerate windows (k=%d, %s)", int(degenerate.sum()), k, kind)
    values = 1.0 - ratio
    outside = np.count_nonzero((values < 0.0) | (values > 2.0))
    if outside:
        # passed through unclipped; the gate only compares forecasts
        logger.info("%d forecasts outside [0, 2] (k=%d, %s)", outside, k, kind)
    return LambdaSeries(targets=targets, values=values, k=k, kind=kind)


def estimate_rho(series, k: int, mode: RhoMode = RhoMode.WindowMean, i: int | None = None) -> float:
    """Forecast of the weak field from history up to ``i``."""
    mode = RhoMode(mode)
    x = _values(series)
    if i is None:
        if x.size == 0:
            raise InsufficientHistoryError("empty series")
        i = int(series.periods[-1]) if isinstance(series, ReturnSeries) else x.size - 1
    if mode is RhoMode.WindowMean:
        return moving_average(series, k, i)
    return float(x[_position(series, i)])
