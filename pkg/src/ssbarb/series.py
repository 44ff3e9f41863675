"""Time-indexed return sequences and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, ParseError

SERIES_HEADER = ("period", "value")


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Ordered per-period returns.

    ``periods`` are strictly increasing integers, ``values`` are finite
    decimal returns (0.01 == 1%). Arrays are stored read-only.
    """

    periods: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        periods = np.array(self.periods, dtype=np.int64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if periods.shape != values.shape:
            raise DataError(
                f"periods ({periods.size}) and values ({values.size}) differ in length"
            )
        if periods.size > 1 and np.any(np.diff(periods) <= 0):
            raise DataError("period indices must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError("return values must be finite")
        periods.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Iterable[float], start: int = 0) -> "ReturnSeries":
        values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                            dtype=np.float64)
        return cls(np.arange(start, start + values.size, dtype=np.int64), values)

    def __len__(self) -> int:
        return int(self.values.size)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return zip(self.periods.tolist(), self.values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReturnSeries):
            return NotImplemented
        return (np.array_equal(self.periods, other.periods)
                and np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        if len(self) == 0:
            return "ReturnSeries(<empty>)"
        return (f"ReturnSeries(n={len(self)}, periods={self.periods[0]}..{self.periods[-1]})")

    def position(self, period: int) -> int:
        """Array position of ``period``; raises ``KeyError`` if absent."""
        pos = int(np.searchsorted(self.periods, period))
        if pos >= self.periods.size or self.periods[pos] != period:
            raise KeyError(f"period {period} not in series")
        return pos

    def shift(self, offset: int) -> "ReturnSeries":
        return ReturnSeries(self.periods + offset, self.values)

    def scale(self, factor: float) -> "ReturnSeries":
        return ReturnSeries(self.periods, self.values * factor)

    def head(self, n: int) -> "ReturnSeries":
        return ReturnSeries(self.periods[:n], self.values[:n])

    def to_csv(self, path=None) -> str:
        """Serialize as ``period,value``; floats use the shortest round-trip repr."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SERIES_HEADER)
        for p, v in self:
            writer.writerow((p, repr(v)))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "ReturnSeries":
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            return cls.read_csv(fh, source=str(path))

    @classmethod
    def read_csv(cls, fh, source=None) -> "ReturnSeries":
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_HEADER:
            raise ParseError(f"expected header {','.join(SERIES_HEADER)}", line=1, source=source)
        periods, values = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=line, source=source)
            try:
                p = int(row[0])
                v = float(row[1])
            except ValueError as exc:
                raise ParseError(str(exc), line=line, source=source) from None
            if not math.isfinite(v):
                raise ParseError("non-finite value", line=line, source=source)
            if periods and p <= periods[-1]:
                raise ParseError("period indices must be strictly increasing",
                                 line=line, source=source)
            periods.append(p)
            values.append(v)
        return cls(np.array(periods, dtype=np.int64), np.array(values, dtype=np.float64))
