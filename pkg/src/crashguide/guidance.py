"""Resolve a driving context to its cluster, day-class and retained rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable

from .codes import CodeTables, default_code_tables
from .grouping import SpatialKey
from .ingest import DAYS
from .mining import FHE, MC, OTHER, AttentionRule, RuleDatabase
from .scenario import COMMON, SparseFlags, classify_scenario
from .tempstats import DayClass, day_class

__all__ = ["DrivingContext", "GuidanceResponse", "resolve_cluster", "query"]


@dataclass(frozen=True)
class DrivingContext:
    flags: SparseFlags
    key: SpatialKey
    month: int
    hour: int
    day_of_week: str

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour out of range: {self.hour}")
        if self.day_of_week not in DAYS:
            raise ValueError(f"day must be one of {DAYS}, got {self.day_of_week!r}")

    @classmethod
    def at(cls, when: datetime | str, key: SpatialKey, flags: SparseFlags | None = None) -> "DrivingContext":
        if isinstance(when, str):
            when = datetime.fromisoformat(when)
        return cls(flags or SparseFlags(), key, when.month, when.hour, DAYS[when.weekday()])


@dataclass(frozen=True)
class GuidanceResponse:
    scenario: str
    cluster_id: int | None
    day_class: str | None
    support_time: float
    rules: tuple[AttentionRule, ...] = ()
    rationale: tuple[str, ...] = field(default=())

    def rules_of(self, kind: str) -> list[AttentionRule]:
        return [r for r in self.rules if r.kind == kind]

    def to_json(self, tables: CodeTables | None = None) -> dict:
        tables = tables or default_code_tables()
        rules = []
        for r in self.rules:
            d = r.to_json()
            d["label"] = _type_label(r, tables)
            rules.append(d)
        return {"scenario": self.scenario, "cluster_id": self.cluster_id, "day_class": self.day_class,
                "support_time": self.support_time, "rules": rules, "rationale": list(self.rationale)}

    @classmethod
    def from_json(cls, obj: dict) -> "GuidanceResponse":
        rules = tuple(AttentionRule.from_json(r) for r in obj.get("rules", []))
        return cls(obj.get("scenario", COMMON), obj.get("cluster_id"), obj.get("day_class"),
                   float(obj.get("support_time", 0.0)), rules, tuple(obj.get("rationale", ())))


def _type_label(rule: AttentionRule, tables: CodeTables) -> str:
    if rule.type == OTHER:
        return "Other"
    return tables.label("fhe" if rule.kind == FHE else "mc", rule.type)


def resolve_cluster(key: SpatialKey, clusters) -> int | None:
    """Cluster id containing ``key``; ``clusters`` is a rule database or an
    iterable of objects with ``id`` and ``member_keys``/``members``."""
    if isinstance(clusters, RuleDatabase):
        return clusters.cluster_of(key)
    if key.is_sentinel:
        return None
    for c in clusters:
        members = getattr(c, "member_keys", None) or getattr(c, "members", ())
        if key in members:
            return c.id
    return None


def _rank(rules: Iterable[AttentionRule]) -> tuple[AttentionRule, ...]:
    return tuple(sorted(rules, key=lambda r: (-r.lift, -r.confidence, r.kind, r.type)))


def query(context: DrivingContext, db: RuleDatabase, tables: CodeTables | None = None) -> GuidanceResponse:
    """Retained rules for a driving context, strongest lift first."""
    tables = tables or default_code_tables()
    scenario = classify_scenario(context.flags, db.scenario_order)
    if scenario != COMMON:
        return GuidanceResponse(scenario, None, None, 0.0, (),
                                (f"scenario '{scenario}' is outside the mined common scenario; no rules",))
    cid = resolve_cluster(context.key, db)
    if cid is None:
        return GuidanceResponse(scenario, None, None, 0.0, (),
                                (f"location {context.key} belongs to no cluster; no rules",))
    entry = db.cluster(cid)
    if entry.day_policy == "split":
        dc = day_class(context.day_of_week, context.hour, db.split).value
    else:
        dc = DayClass.ALL.value
    fam = db.family(cid, dc)
    s = fam.support_time(context.month, context.hour) if fam else 0.0
    rules = _rank(db.lookup(cid, dc, context.month, context.hour))
    why = [f"cluster {cid} ({dc}), month {context.month}, hour {context.hour}: spot support {s:.4f}"]
    if not rules:
        why.append("no rule passes screening at this spot")
    for r in rules:
        text = (f"{r.kind} '{_type_label(r, tables)}': confidence {r.confidence:.4f}, lift {r.lift:.4f}")
        if r.kind == MC:
            text += " (conditional on motor-vehicle-in-transport FHE)"
        why.append(text)
    return GuidanceResponse(scenario, cid, dc, s, rules, tuple(why))
