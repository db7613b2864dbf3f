"""Spatially defined groups: crashes sharing road type, trafficway area and junction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .tempstats import TemporalGrid, UndefinedStatistic, month_hour_histogram, morans_i

__all__ = ["SpatialKey", "SpatialGroup", "key_of", "partition_groups", "filter_by_size", "groups_summary"]


class SpatialKey(NamedTuple):
    func_sys: int | None
    rel_road: int | None
    jun_int: str | None

    @property
    def is_sentinel(self) -> bool:
        """True when any component is Unknown."""
        return self.func_sys is None or self.rel_road is None or self.jun_int is None

    def sort_key(self) -> tuple:
        return (
            (1, 0) if self.func_sys is None else (0, self.func_sys),
            (1, 0) if self.rel_road is None else (0, self.rel_road),
            (1, "") if self.jun_int is None else (0, self.jun_int),
        )

    def to_json(self) -> list:
        return [self.func_sys, self.rel_road, self.jun_int]

    @classmethod
    def from_json(cls, obj: Sequence) -> "SpatialKey":
        f, r, j = obj
        return cls(None if f is None else int(f), None if r is None else int(r), None if j is None else str(j))

    def __str__(self) -> str:
        fmt = lambda v: "?" if v is None else str(v)  # noqa: E731
        return f"{fmt(self.func_sys)}/{fmt(self.rel_road)}/{fmt(self.jun_int)}"


def key_of(record) -> SpatialKey:
    return SpatialKey(record.func_sys, record.rel_road, record.jun_int)


@dataclass(frozen=True)
class SpatialGroup:
    key: SpatialKey
    members: tuple
    grid: TemporalGrid
    morans_i: float | None  # None when the grid is constant

    @property
    def size(self) -> int:
        return len(self.members)


def _make_group(key: SpatialKey, members: Sequence) -> SpatialGroup:
    grid = month_hour_histogram(members)
    try:
        moran = morans_i(grid)
    except UndefinedStatistic:
        moran = None
    return SpatialGroup(key, tuple(members), grid, moran)


def partition_groups(records: Iterable) -> dict[SpatialKey, SpatialGroup]:
    """Group records by spatial key; keys are returned in sorted order."""
    buckets: dict[SpatialKey, list] = {}
    for rec in records:
        buckets.setdefault(key_of(rec), []).append(rec)
    return {k: _make_group(k, buckets[k]) for k in sorted(buckets, key=SpatialKey.sort_key)}


def filter_by_size(groups: Mapping[SpatialKey, SpatialGroup], threshold: int = 100, strict: bool = True):
    """Split groups into (large, small); large means size > threshold (>= if not strict)."""
    large, small = {}, {}
    for key, g in groups.items():
        big = g.size > threshold if strict else g.size >= threshold
        (large if big else small)[key] = g
    return large, small


def groups_summary(groups: Mapping[SpatialKey, SpatialGroup], tables=None) -> list[dict]:
    rows = []
    for key, g in groups.items():
        row = {
            "func_sys": key.func_sys,
            "rel_road": key.rel_road,
            "jun_int": key.jun_int,
            "size": g.size,
            "morans_i": g.morans_i,
            "sentinel": key.is_sentinel,
        }
        if tables is not None:
            row["label"] = ", ".join((
                tables.label("func_sys", key.func_sys),
                tables.label("rel_road", key.rel_road),
                tables.jun_int_label(key.jun_int),
            ))
        rows.append(row)
    return rows
