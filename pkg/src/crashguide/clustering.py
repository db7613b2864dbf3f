"""Two-step clustering of spatial groups by temporal-pattern similarity.

Step one merges large groups bottom-up, always joining the pair of clusters
whose summed month-hour grids have the highest Pearson correlation, until a
:class:`StopCriterion` fires.  Step two assigns the leftover groups with a
declarative :class:`MergePlan`.  Finally each cluster decides whether its
weekday and weekend patterns should be kept apart.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .grouping import SpatialGroup, SpatialKey
from .tempstats import (
    DayClass,
    TemporalGrid,
    UndefinedStatistic,
    WeekSplit,
    day_class,
    month_hour_histogram,
    morans_i,
    pearson_r,
)

__all__ = [
    "ClusteringError",
    "PlanError",
    "DayPolicy",
    "StopCriterion",
    "MergeEvent",
    "DendrogramTrace",
    "MergeDirective",
    "MergePlan",
    "SpatialCluster",
    "DayPolicyDecision",
    "agglomerate",
    "number_step1_clusters",
    "apply_merge_plan",
    "decide_day_policy",
    "finalize_clusters",
    "split_records",
    "family_records",
]

log = logging.getLogger(__name__)


class ClusteringError(ValueError):
    pass


class PlanError(ValueError):
    pass


class DayPolicy(str, enum.Enum):
    WHOLE_WEEK = "whole_week"
    SPLIT = "split"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StopCriterion:
    """Stop merging when the best similarity drops below ``min_r`` or when
    ``n_clusters`` clusters remain, whichever comes first."""

    min_r: float | None = 0.55
    n_clusters: int | None = None

    def __post_init__(self):
        if self.min_r is None and self.n_clusters is None:
            raise ValueError("stop criterion needs min_r or n_clusters")
        if self.n_clusters is not None and self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")


@dataclass(frozen=True)
class MergeEvent:
    iteration: int
    left: int
    right: int
    new: int
    r: float
    size: int  # crashes in the merged cluster

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "left": self.left, "right": self.right,
                "new": self.new, "r": self.r, "size": self.size}


@dataclass
class DendrogramTrace:
    """Merge history.  Labels 0..n-1 are the input groups in order."""

    leaves: list[SpatialKey] = field(default_factory=list)
    events: list[MergeEvent] = field(default_factory=list)
    stop_reason: str = ""

    def to_json(self) -> dict:
        return {
            "leaves": [k.to_json() for k in self.leaves],
            "events": [e.to_json() for e in self.events],
            "stop_reason": self.stop_reason,
        }


@dataclass(frozen=True, eq=False)
class _Node:
    label: int
    groups: tuple[SpatialGroup, ...]
    grid: TemporalGrid

    @property
    def size(self) -> int:
        return sum(g.size for g in self.groups)


def _similarity(a: _Node, b: _Node) -> float | None:
    try:
        return pearson_r(a.grid, b.grid)
    except UndefinedStatistic:
        return None


def agglomerate(groups: Mapping[SpatialKey, SpatialGroup] | Sequence[SpatialGroup],
                stop: StopCriterion = StopCriterion()) -> tuple[list[tuple[SpatialGroup, ...]], DendrogramTrace]:
    """Greedy centroid-style agglomeration under Pearson's r.

    Returns the member groups of every cluster alive when the criterion
    fired, in order of their first member, plus the merge trace.  Pairs
    whose correlation is undefined are never merged; ties go to the pair
    that comes first in the current cluster order.
    """
    groups = list(groups.values()) if isinstance(groups, Mapping) else list(groups)
    if len(groups) < 2:
        raise ClusteringError("agglomeration needs at least two groups")
    if all(g.grid.counts.min() == g.grid.counts.max() for g in groups):
        raise ClusteringError("every group grid is constant; no similarity is defined")

    nodes = [_Node(i, (g,), g.grid) for i, g in enumerate(groups)]
    trace = DendrogramTrace(leaves=[g.key for g in groups])
    sims: dict[tuple[int, int], float] = {}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            r = _similarity(a, b)
            if r is not None:
                sims[(a.label, b.label)] = r

    next_label = len(nodes)
    iteration = 0
    while True:
        if stop.n_clusters is not None and len(nodes) <= stop.n_clusters:
            trace.stop_reason = f"reached {len(nodes)} clusters"
            break
        best = None
        for i, a in enumerate(nodes):
            for b in nodes[i + 1:]:
                r = sims.get((a.label, b.label))
                if r is not None and (best is None or r > best[0]):
                    best = (r, a, b)
        if best is None:
            trace.stop_reason = "no pair with a defined similarity"
            break
        r, a, b = best
        if stop.min_r is not None and r < stop.min_r:
            trace.stop_reason = f"best similarity {r:.4f} below {stop.min_r}"
            break
        iteration += 1
        merged = _Node(next_label, a.groups + b.groups, a.grid + b.grid)
        trace.events.append(MergeEvent(iteration, a.label, b.label, merged.label, r, merged.size))
        next_label += 1
        pos = nodes.index(a)
        nodes = [n for n in nodes if n is not a and n is not b]
        nodes.insert(pos, merged)
        sims = {k: v for k, v in sims.items() if a.label not in k and b.label not in k}
        for n in nodes:
            if n is merged:
                continue
            s = _similarity(n, merged)
            if s is not None:
                pair = (n.label, merged.label) if nodes.index(n) < nodes.index(merged) else (merged.label, n.label)
                sims[pair] = s
    return [n.groups for n in nodes], trace


@dataclass(frozen=True)
class SpatialCluster:
    id: int
    groups: tuple[SpatialGroup, ...]
    day_policy: DayPolicy = DayPolicy.WHOLE_WEEK
    weekday_grid: TemporalGrid | None = None
    weekend_grid: TemporalGrid | None = None
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def member_keys(self) -> frozenset[SpatialKey]:
        return frozenset(g.key for g in self.groups)

    @property
    def grid(self) -> TemporalGrid:
        total = TemporalGrid.zeros()
        for g in self.groups:
            total = total + g.grid
        return total

    @property
    def size(self) -> int:
        return sum(g.size for g in self.groups)

    def records(self) -> list:
        return [r for g in self.groups for r in g.members]

    def day_classes(self) -> tuple[DayClass, ...]:
        if self.day_policy is DayPolicy.SPLIT:
            return (DayClass.WEEKDAY, DayClass.WEEKEND)
        return (DayClass.ALL,)


def _sorted_groups(groups: Iterable[SpatialGroup]) -> tuple[SpatialGroup, ...]:
    return tuple(sorted(groups, key=lambda g: g.key.sort_key()))


def number_step1_clusters(step1: Sequence[Sequence[SpatialGroup]]) -> tuple[list[SpatialCluster], list[SpatialGroup]]:
    """Turn agglomeration output into numbered clusters plus leftovers.

    Only multi-group clusters are kept; they are numbered from 1 in order
    of decreasing crash count (ties by smallest member key).  Single-group
    clusters are handed back as leftovers for the merge plan.
    """
    multi = [_sorted_groups(c) for c in step1 if len(c) > 1]
    singles = [c[0] for c in step1 if len(c) == 1]
    multi.sort(key=lambda gs: (-sum(g.size for g in gs), gs[0].key.sort_key()))
    return [SpatialCluster(i + 1, gs) for i, gs in enumerate(multi)], singles


_KEY_FIELDS = ("func_sys", "rel_road", "jun_int")


@dataclass(frozen=True)
class MergeDirective:
    """Send every group whose key matches all listed field values to ``target``."""

    target: int
    match: tuple[tuple[str, frozenset], ...]
    name: str = ""

    @classmethod
    def build(cls, target: int, name: str = "", **fields) -> "MergeDirective":
        match = []
        for f in _KEY_FIELDS:
            if f in fields and fields[f] is not None:
                vals = fields[f]
                if isinstance(vals, (str, int)):
                    vals = [vals]
                conv = str if f == "jun_int" else int
                match.append((f, frozenset(conv(v) for v in vals)))
        extra = set(fields) - set(_KEY_FIELDS)
        if extra:
            raise PlanError(f"unknown directive field(s) {sorted(extra)}")
        return cls(int(target), tuple(match), name)

    def matches(self, key: SpatialKey) -> bool:
        return all(getattr(key, f) in vals for f, vals in self.match)

    def to_json(self) -> dict:
        out = {"target": self.target, "name": self.name}
        for f, vals in self.match:
            out[f] = sorted(vals)
        return out


@dataclass(frozen=True)
class MergePlan:
    directives: tuple[MergeDirective, ...] = ()
    residual_id: int | None = None  # default: one past the largest cluster id

    @classmethod
    def from_config(cls, entries: Sequence[Mapping], residual_id: int | None = None) -> "MergePlan":
        directives = []
        for e in entries:
            e = dict(e)
            if "target" not in e:
                raise PlanError(f"merge directive without target: {e}")
            target = e.pop("target")
            name = e.pop("name", "")
            directives.append(MergeDirective.build(target, name, **e))
        return cls(tuple(directives), residual_id)

    def validate(self, cluster_ids: Iterable[int]) -> int:
        ids = set(cluster_ids)
        for d in self.directives:
            if d.target not in ids:
                raise PlanError(f"directive {d.name or d.match} targets unknown cluster {d.target}")
        residual = self.residual_id if self.residual_id is not None else max(ids, default=0) + 1
        if residual in ids:
            raise PlanError(f"residual cluster id {residual} collides with an existing cluster")
        return residual

    def to_json(self) -> dict:
        return {"directives": [d.to_json() for d in self.directives], "residual_id": self.residual_id}


def apply_merge_plan(clusters: Sequence[SpatialCluster], remaining: Iterable[SpatialGroup],
                     plan: MergePlan) -> list[SpatialCluster]:
    """Assign each remaining group to the first matching directive's cluster;
    unmatched groups form the residual cluster."""
    residual_id = plan.validate(c.id for c in clusters)
    extra: dict[int, list[SpatialGroup]] = {c.id: [] for c in clusters}
    residual: list[SpatialGroup] = []
    for g in remaining:
        for d in plan.directives:
            if d.matches(g.key):
                extra[d.target].append(g)
                break
        else:
            residual.append(g)
    out = [replace(c, groups=_sorted_groups(c.groups + tuple(extra[c.id]))) for c in clusters]
    if residual:
        out.append(SpatialCluster(residual_id, _sorted_groups(residual)))
    return sorted(out, key=lambda c: c.id)


def split_records(records: Iterable, split: WeekSplit) -> dict[DayClass, list]:
    """Weekday and weekend subsets; records with unknown day or hour are left out."""
    out = {DayClass.WEEKDAY: [], DayClass.WEEKEND: []}
    for rec in records:
        if rec.hour is None or rec.day_of_week is None:
            continue
        out[day_class(rec.day_of_week, rec.hour, split)].append(rec)
    return out


@dataclass(frozen=True)
class DayPolicyDecision:
    policy: DayPolicy
    i_whole: float | None
    i_weekday: float | None
    i_weekend: float | None
    r_weekday_weekend: float | None
    weekday_grid: TemporalGrid
    weekend_grid: TemporalGrid
    warning: str = ""

    def to_json(self) -> dict:
        return {"policy": self.policy.value, "i_whole": self.i_whole, "i_weekday": self.i_weekday,
                "i_weekend": self.i_weekend, "r_weekday_weekend": self.r_weekday_weekend,
                "warning": self.warning}


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatistic:
        return None


def decide_day_policy(cluster: SpatialCluster, split: WeekSplit, r_threshold: float | None = None,
                      i_threshold: float = 0.7) -> DayPolicyDecision:
    """Split a cluster into weekday and weekend patterns only when both have
    Moran's I of at least ``i_threshold``.  Pearson's r between the two is
    reported; it only gates the decision when ``r_threshold`` is given (split
    requires r below it)."""
    parts = split_records(cluster.records(), split)
    wd = month_hour_histogram(parts[DayClass.WEEKDAY])
    we = month_hour_histogram(parts[DayClass.WEEKEND])
    i_whole = _maybe(morans_i, cluster.grid)
    i_wd = _maybe(morans_i, wd)
    i_we = _maybe(morans_i, we)
    r = _maybe(pearson_r, wd, we)
    if i_wd is None or i_we is None:
        msg = f"cluster {cluster.id}: day-class Moran's I undefined, keeping whole week"
        log.warning(msg)
        return DayPolicyDecision(DayPolicy.WHOLE_WEEK, i_whole, i_wd, i_we, r, wd, we, msg)
    split_ok = i_wd >= i_threshold and i_we >= i_threshold
    if split_ok and r_threshold is not None:
        split_ok = r is not None and r < r_threshold
    policy = DayPolicy.SPLIT if split_ok else DayPolicy.WHOLE_WEEK
    return DayPolicyDecision(policy, i_whole, i_wd, i_we, r, wd, we)


def finalize_clusters(clusters: Sequence[SpatialCluster], split: WeekSplit, i_threshold: float = 0.7,
                      r_threshold: float | None = None) -> list[SpatialCluster]:
    out = []
    for c in clusters:
        d = decide_day_policy(c, split, r_threshold=r_threshold, i_threshold=i_threshold)
        out.append(replace(c, day_policy=d.policy, weekday_grid=d.weekday_grid,
                           weekend_grid=d.weekend_grid, stats=d.to_json()))
    return out


def family_records(cluster: SpatialCluster, dc: DayClass, split: WeekSplit) -> list:
    """Known-hour members of one cluster x day-class subpopulation."""
    if dc is DayClass.ALL:
        return [r for r in cluster.records() if r.hour is not None]
    return split_records(cluster.records(), split)[dc]
