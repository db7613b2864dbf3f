"""Time-spot => crash-type association rules with support, confidence and lift.

For one cluster x day-class subpopulation, with x[i,j] crashes in month i
and hour j and x[i,j,k] of those of type k:

    support_time  S[i,j]   = x[i,j] / N
    support_type  S[k]     = sum_ij x[i,j,k] / N
    confidence    C[i,j,k] = x[i,j,k] / x[i,j]
    lift          L[i,j,k] = C[i,j,k] / S[k]

Manner-of-collision rules are mined over the motor-vehicle-in-transport
crashes only, so their N is that subset's size.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .clustering import DayPolicy, SpatialCluster, family_records
from .codes import CodeTables, default_code_tables
from .grouping import SpatialKey
from .tempstats import DayClass, WeekSplit, month_hour_histogram

__all__ = [
    "FHE",
    "MC",
    "OTHER",
    "AttentionRule",
    "ScreeningCriteria",
    "ClusterEntry",
    "FamilyEntry",
    "RuleDatabase",
    "RuleDBError",
    "consequent_type",
    "mine_rules",
    "screen_rules",
    "build_rule_db",
    "save_rule_db",
    "load_rule_db",
]

FHE = "FHE"
MC = "MC"
KINDS = (FHE, MC)
OTHER = -1  # consequent codes outside the closed taxonomy

RULEDB_SCHEMA = "crashguide.rules"
RULEDB_VERSION = 1


class RuleDBError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionRule:
    cluster_id: int
    day_class: str
    month: int
    hour: int
    kind: str
    type: int
    x_ij: int
    x_ijk: int
    n_k: int
    total: int
    support_time: float
    support_type: float
    confidence: float
    lift: float

    @property
    def key(self) -> tuple[int, str, int, int]:
        return (self.cluster_id, self.day_class, self.month, self.hour)

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in _RULE_FIELDS}

    @classmethod
    def from_json(cls, obj: dict) -> "AttentionRule":
        return cls(**{name: obj[name] for name in _RULE_FIELDS})


_RULE_FIELDS = tuple(AttentionRule.__dataclass_fields__)


def consequent_type(record, kind: str, tables: CodeTables) -> int:
    code = record.fhe if kind == FHE else record.mc
    if code is None:
        return OTHER
    return code if code in tables.variables["fhe" if kind == FHE else "mc"].labels else OTHER


def _population(records: Iterable, kind: str, tables: CodeTables) -> list:
    recs = [r for r in records if r.hour is not None]
    if kind == MC:
        recs = [r for r in recs if r.fhe == tables.mvit_code]
    elif kind != FHE:
        raise ValueError(f"unknown rule kind {kind!r}")
    return recs


def mine_rules(records: Iterable, day_class: DayClass | str, kind: str, cluster_id: int = 0,
               tables: CodeTables | None = None) -> list[AttentionRule]:
    """All unscreened rules with at least one supporting crash, sorted by
    (month, hour, type)."""
    tables = tables or default_code_tables()
    recs = _population(records, kind, tables)
    n = len(recs)
    if n == 0:
        return []
    x_ij: Counter = Counter()
    x_ijk: Counter = Counter()
    n_k: Counter = Counter()
    for r in recs:
        k = consequent_type(r, kind, tables)
        x_ij[(r.month, r.hour)] += 1
        x_ijk[(r.month, r.hour, k)] += 1
        n_k[k] += 1
    dc = str(DayClass(day_class))
    rules = []
    for (i, j, k), cnt in sorted(x_ijk.items()):
        spot = x_ij[(i, j)]
        s_k = n_k[k] / n
        c = cnt / spot
        rules.append(AttentionRule(
            cluster_id=cluster_id, day_class=dc, month=i, hour=j, kind=kind, type=k,
            x_ij=spot, x_ijk=cnt, n_k=n_k[k], total=n,
            support_time=spot / n, support_type=s_k, confidence=c, lift=c / s_k,
        ))
    return rules


@dataclass(frozen=True)
class ScreeningCriteria:
    min_support_time: float = 1.0 / 288.0
    min_support_type: float = 0.05
    min_lift: float = 1.0  # strict

    def __post_init__(self):
        for name in ("min_support_time", "min_support_type", "min_lift"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def accepts(self, rule: AttentionRule) -> bool:
        return (rule.support_time >= self.min_support_time
                and rule.support_type >= self.min_support_type
                and rule.lift > self.min_lift)

    def to_json(self) -> dict:
        return {"min_support_time": self.min_support_time, "min_support_type": self.min_support_type,
                "min_lift": self.min_lift}

    @classmethod
    def from_json(cls, obj: dict) -> "ScreeningCriteria":
        return cls(**{k: float(v) for k, v in obj.items()})


def screen_rules(rules: Iterable[AttentionRule], criteria: ScreeningCriteria = ScreeningCriteria()) -> list[AttentionRule]:
    return [r for r in rules if criteria.accepts(r)]


@dataclass(frozen=True)
class ClusterEntry:
    id: int
    day_policy: str
    members: tuple[SpatialKey, ...]
    size: int
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"id": self.id, "day_policy": self.day_policy, "size": self.size,
                "members": [k.to_json() for k in self.members], "stats": self.stats}

    @classmethod
    def from_json(cls, obj: dict) -> "ClusterEntry":
        return cls(int(obj["id"]), obj["day_policy"], tuple(SpatialKey.from_json(k) for k in obj["members"]),
                   int(obj["size"]), obj.get("stats", {}))


@dataclass(frozen=True)
class FamilyEntry:
    """Spot counts of one cluster x day-class subpopulation."""

    cluster_id: int
    day_class: str
    total: int
    spot_counts: tuple[tuple[int, ...], ...]
    mvit_total: int

    def support_time(self, month: int, hour: int) -> float:
        if self.total == 0:
            return 0.0
        return self.spot_counts[month - 1][hour] / self.total

    def to_json(self) -> dict:
        return {"cluster_id": self.cluster_id, "day_class": self.day_class, "total": self.total,
                "mvit_total": self.mvit_total, "spot_counts": [list(r) for r in self.spot_counts]}

    @classmethod
    def from_json(cls, obj: dict) -> "FamilyEntry":
        return cls(int(obj["cluster_id"]), obj["day_class"], int(obj["total"]),
                   tuple(tuple(int(v) for v in row) for row in obj["spot_counts"]), int(obj["mvit_total"]))


@dataclass(frozen=True)
class RuleDatabase:
    dataset_id: str
    config_hash: str
    criteria: ScreeningCriteria
    split: WeekSplit
    scenario_order: tuple[str, ...]
    clusters: tuple[ClusterEntry, ...]
    families: tuple[FamilyEntry, ...]
    rules: tuple[AttentionRule, ...]
    version: int = RULEDB_VERSION

    def __post_init__(self):
        index: dict[tuple, list[AttentionRule]] = {}
        for r in self.rules:
            index.setdefault(r.key, []).append(r)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_key_to_cluster", {k: c.id for c in self.clusters for k in c.members})

    def __eq__(self, other) -> bool:
        if not isinstance(other, RuleDatabase):
            return NotImplemented
        return self.to_json() == other.to_json()

    def lookup(self, cluster_id: int, day_class: str, month: int, hour: int) -> list[AttentionRule]:
        return list(self._index.get((cluster_id, str(day_class), month, hour), []))

    def cluster_of(self, key: SpatialKey) -> int | None:
        return self._key_to_cluster.get(key)

    def cluster(self, cluster_id: int) -> ClusterEntry:
        for c in self.clusters:
            if c.id == cluster_id:
                return c
        raise KeyError(cluster_id)

    def family(self, cluster_id: int, day_class: str) -> FamilyEntry | None:
        for f in self.families:
            if f.cluster_id == cluster_id and f.day_class == str(day_class):
                return f
        return None

    def family_keys(self) -> list[tuple[int, str]]:
        return [(f.cluster_id, f.day_class) for f in self.families]

    def to_json(self) -> dict:
        return {
            "schema": RULEDB_SCHEMA,
            "version": self.version,
            "dataset_id": self.dataset_id,
            "config_hash": self.config_hash,
            "criteria": self.criteria.to_json(),
            "split": {"p": self.split.p, "q": self.split.q},
            "scenario_order": list(self.scenario_order),
            "clusters": [c.to_json() for c in self.clusters],
            "families": [f.to_json() for f in self.families],
            "rules": [r.to_json() for r in self.rules],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RuleDatabase":
        if obj.get("schema") != RULEDB_SCHEMA:
            raise RuleDBError("not a crashguide rule database")
        if obj.get("version") != RULEDB_VERSION:
            raise RuleDBError(f"rule database version {obj.get('version')} != {RULEDB_VERSION}")
        try:
            return cls(
                dataset_id=obj["dataset_id"],
                config_hash=obj["config_hash"],
                criteria=ScreeningCriteria.from_json(obj["criteria"]),
                split=WeekSplit(int(obj["split"]["p"]), int(obj["split"]["q"])),
                scenario_order=tuple(obj["scenario_order"]),
                clusters=tuple(ClusterEntry.from_json(c) for c in obj["clusters"]),
                families=tuple(FamilyEntry.from_json(f) for f in obj["families"]),
                rules=tuple(AttentionRule.from_json(r) for r in obj["rules"]),
            )
        except (KeyError, TypeError) as exc:
            raise RuleDBError(f"malformed rule database: {exc}") from exc


def build_rule_db(clusters: Sequence[SpatialCluster], split: WeekSplit,
                  criteria: ScreeningCriteria = ScreeningCriteria(), tables: CodeTables | None = None,
                  dataset_id: str = "", config_hash: str = "",
                  scenario_order: Sequence[str] | None = None) -> RuleDatabase:
    """Mine and screen FHE and MC rules for every cluster x applicable day-class."""
    from .scenario import SPARSE_VARIABLES

    tables = tables or default_code_tables()
    entries, families, rules = [], [], []
    for c in sorted(clusters, key=lambda c: c.id):
        entries.append(ClusterEntry(c.id, DayPolicy(c.day_policy).value,
                                    tuple(sorted(c.member_keys, key=SpatialKey.sort_key)), c.size, dict(c.stats)))
        for dc in c.day_classes():
            recs = family_records(c, dc, split)
            grid = month_hour_histogram(recs)
            families.append(FamilyEntry(c.id, dc.value, grid.total,
                                        tuple(tuple(int(v) for v in row) for row in grid.counts),
                                        sum(1 for r in recs if r.fhe == tables.mvit_code)))
            for kind in KINDS:
                rules.extend(screen_rules(mine_rules(recs, dc, kind, c.id, tables), criteria))
    return RuleDatabase(
        dataset_id=dataset_id,
        config_hash=config_hash,
        criteria=criteria,
        split=WeekSplit(split.p, split.q),
        scenario_order=tuple(scenario_order or SPARSE_VARIABLES),
        clusters=tuple(entries),
        families=tuple(families),
        rules=tuple(rules),
    )


def save_rule_db(db: RuleDatabase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(db.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_rule_db(path: str | Path) -> RuleDatabase:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RuleDBError(f"{path}: unreadable rule database ({exc})") from exc
    return RuleDatabase.from_json(obj)
