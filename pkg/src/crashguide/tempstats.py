"""Month-hour grids, the weekday/weekend split, Moran's I and Pearson's r."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .ingest import DAYS

__all__ = [
    "N_MONTHS",
    "N_HOURS",
    "UndefinedStatistic",
    "DayClass",
    "TemporalGrid",
    "WeekSplit",
    "REFERENCE_SPLIT",
    "NeighborWeights",
    "month_hour_histogram",
    "week_hour_series",
    "split_objectives",
    "optimize_week_split",
    "day_class",
    "queen_weights",
    "morans_i",
    "pearson_r",
]

N_MONTHS = 12
N_HOURS = 24
GRID_SHAPE = (N_MONTHS, N_HOURS)


class UndefinedStatistic(ValueError):
    """Raised when a statistic has a zero denominator (constant input)."""


class DayClass(str, enum.Enum):
    WEEKDAY = "weekday"
    WEEKEND = "weekend"
    ALL = "all"  # whole week, for clusters that are not split

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TemporalGrid:
    """12x24 crash counts; row i is month i+1, column j is hour j."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != GRID_SHAPE:
            raise ValueError(f"grid must be {GRID_SHAPE}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("grid counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls) -> "TemporalGrid":
        return cls(np.zeros(GRID_SHAPE, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "TemporalGrid") -> "TemporalGrid":
        return TemporalGrid(self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, TemporalGrid) and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash(self.counts.tobytes())

    def at(self, month: int, hour: int) -> int:
        return int(self.counts[month - 1, hour])

    def to_json(self) -> list[list[int]]:
        return self.counts.tolist()


def month_hour_histogram(records: Iterable) -> TemporalGrid:
    """Tally records on the month-hour grid; unknown hours are skipped."""
    counts = np.zeros(GRID_SHAPE, dtype=np.int64)
    for rec in records:
        if rec.hour is not None:
            counts[rec.month - 1, rec.hour] += 1
    return TemporalGrid(counts)


def week_hour_series(records: Iterable) -> np.ndarray:
    """7x24 counts, rows Monday..Sunday; unknown day or hour skipped."""
    series = np.zeros((7, N_HOURS), dtype=np.int64)
    row = {d: i for i, d in enumerate(DAYS)}
    for rec in records:
        if rec.hour is not None and rec.day_of_week is not None:
            series[row[rec.day_of_week], rec.hour] += 1
    return series


@dataclass(frozen=True)
class WeekSplit:
    """Friday hours 0..p are weekday; Sunday hours 0..q are weekend."""

    p: int
    q: int
    ss_fr: float = float("nan")
    ss_su: float = float("nan")

    def __post_init__(self):
        if not (0 <= self.p <= 23 and 0 <= self.q <= 23):
            raise ValueError(f"split indices must lie in 0..23, got p={self.p}, q={self.q}")

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "ss_fr": self.ss_fr, "ss_su": self.ss_su}

    @classmethod
    def from_json(cls, obj: dict) -> "WeekSplit":
        return cls(int(obj["p"]), int(obj["q"]), float(obj.get("ss_fr", "nan")), float(obj.get("ss_su", "nan")))


# Friday 0:00-11:59 weekday, Sunday 0:00-8:59 weekend
REFERENCE_SPLIT = WeekSplit(p=11, q=8)


def _centroids(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    weekday = series[0:4].sum(axis=0) / 4.0
    weekend = series[5].astype(float)
    return weekday, weekend


def split_objectives(series) -> tuple[np.ndarray, np.ndarray]:
    """Squared-error objective for every Friday and Sunday cut point.

    Returns ``(ss_fr, ss_su)``, each of length 24, indexed by the last hour
    of the first segment.
    """
    series = np.asarray(series, dtype=float)
    if series.shape != (7, N_HOURS):
        raise ValueError(f"week series must be 7x24, got {series.shape}")
    x_d, x_e = _centroids(series)
    fr, su = series[4], series[6]

    def objective(day, first, second):
        head = np.cumsum((day - first) ** 2)
        tail_all = np.cumsum(((day - second) ** 2)[::-1])[::-1]
        tail = np.append(tail_all[1:], 0.0)  # hours p+1..23
        return head + tail

    return objective(fr, x_d, x_e), objective(su, x_e, x_d)


def optimize_week_split(series) -> WeekSplit:
    """Choose the Friday and Sunday cut points minimizing squared error.

    Friday's first segment is compared against the Monday-Thursday mean and
    its remainder against Saturday; Sunday is the mirror image.  Ties go to
    the smallest hour.
    """
    ss_fr, ss_su = split_objectives(series)
    p = int(np.argmin(ss_fr))
    q = int(np.argmin(ss_su))
    return WeekSplit(p, q, float(ss_fr[p]), float(ss_su[q]))


def day_class(day: str, hour: int, split: WeekSplit) -> DayClass:
    if day in ("Mo", "Tu", "We", "Th"):
        return DayClass.WEEKDAY
    if day == "Sa":
        return DayClass.WEEKEND
    if day == "Fr":
        return DayClass.WEEKDAY if hour <= split.p else DayClass.WEEKEND
    if day == "Su":
        return DayClass.WEEKEND if hour <= split.q else DayClass.WEEKDAY
    raise ValueError(f"unknown day {day!r}")


@dataclass(frozen=True)
class NeighborWeights:
    """Binary queen-contiguity weights over a rows x cols grid, no wraparound."""

    shape: tuple[int, int]
    matrix: np.ndarray

    @property
    def W(self) -> float:
        return float(self.matrix.sum())

    def degrees(self) -> np.ndarray:
        return self.matrix.sum(axis=1).reshape(self.shape)


def queen_weights(shape: tuple[int, int] = GRID_SHAPE) -> NeighborWeights:
    rows, cols = shape
    n = rows * cols
    r, c = np.divmod(np.arange(n), cols)
    dr = np.abs(r[:, None] - r[None, :])
    dc = np.abs(c[:, None] - c[None, :])
    w = ((dr <= 1) & (dc <= 1)).astype(float)
    np.fill_diagonal(w, 0.0)
    return NeighborWeights((rows, cols), w)


_QUEEN_KERNEL = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=float)


def _values(grid) -> np.ndarray:
    if isinstance(grid, TemporalGrid):
        return grid.counts.astype(float)
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 2:
        raise ValueError("grid must be two-dimensional")
    return arr


def morans_i(grid, weights: NeighborWeights | None = None) -> float:
    """Global Moran's I of a 2-D grid.

    With ``weights=None`` queen contiguity is applied by convolution, which
    is what permutation tests want; an explicit :class:`NeighborWeights`
    goes through the dense quadratic form.  The result is not clamped to
    [-1, 1].
    """
    y = _values(grid)
    z = y - y.mean()
    denom = float((z * z).sum())
    if denom == 0.0:
        raise UndefinedStatistic("Moran's I is undefined for a constant grid")
    n = z.size
    if weights is None:
        lag = ndimage.convolve(z, _QUEEN_KERNEL, mode="constant", cval=0.0)
        total_w = float(ndimage.convolve(np.ones_like(z), _QUEEN_KERNEL, mode="constant", cval=0.0).sum())
        num = float((z * lag).sum())
    else:
        if tuple(weights.shape) != z.shape:
            raise ValueError(f"weights are for {weights.shape}, grid is {z.shape}")
        flat = z.ravel()
        num = float(flat @ weights.matrix @ flat)
        total_w = weights.W
    return (n / total_w) * num / denom


def pearson_r(a, b) -> float:
    """Product-moment correlation of two grids flattened to vectors."""
    x = _values(a).ravel()
    y = _values(b).ravel()
    if x.shape != y.shape:
        raise ValueError("grids differ in size")
    zx = x - x.mean()
    zy = y - y.mean()
    sx = float(zx @ zx)
    sy = float(zy @ zy)
    if sx == 0.0 or sy == 0.0:
        raise UndefinedStatistic("Pearson's r is undefined for a constant grid")
    r = float(zx @ zy) / np.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, r)))
