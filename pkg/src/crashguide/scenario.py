"""Hierarchical decomposition of crashes into mutually exclusive scenarios.

Five sparse binary variables are consumed one at a time, rarest first.  At
each level the records with the flag set form a scenario leaf and the rest
continue down the tree; whatever is left after the fifth split is the
common scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

__all__ = [
    "SPARSE_VARIABLES",
    "COMMON",
    "SparseFlags",
    "ScenarioLeaf",
    "ScenarioTree",
    "flags_of",
    "rank_sparse_variables",
    "decompose",
    "classify_scenario",
    "common_records",
]

# canonical order, also the tie-break for ranking
SPARSE_VARIABLES = ("sch_bus", "work_zone", "within_interchange", "crash_factor", "bad_weather")
COMMON = "common"


@dataclass(frozen=True)
class SparseFlags:
    sch_bus: bool = False
    work_zone: bool = False
    within_interchange: bool = False
    crash_factor: bool = False
    bad_weather: bool = False

    def get(self, name: str) -> bool:
        return getattr(self, name)

    @classmethod
    def from_mapping(cls, m: Mapping[str, bool]) -> "SparseFlags":
        unknown = set(m) - set(SPARSE_VARIABLES)
        if unknown:
            raise ValueError(f"unknown sparse flags {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in m.items()})


def flags_of(record) -> SparseFlags:
    return SparseFlags(*(bool(getattr(record, name)) for name in SPARSE_VARIABLES))


@dataclass(frozen=True)
class ScenarioLeaf:
    id: str
    predicate: str
    depth: int
    count: int


@dataclass(frozen=True)
class ScenarioTree:
    order: tuple[str, ...]
    leaves: tuple[ScenarioLeaf, ...]
    assignment: tuple[str, ...]  # leaf id per input record, input order

    @property
    def total(self) -> int:
        return len(self.assignment)

    def leaf(self, scenario_id: str) -> ScenarioLeaf:
        for leaf in self.leaves:
            if leaf.id == scenario_id:
                return leaf
        raise KeyError(scenario_id)

    def members(self, records: Sequence, scenario_id: str) -> list:
        return [r for r, sid in zip(records, self.assignment) if sid == scenario_id]

    def summary(self) -> dict:
        n = self.total
        return {
            "order": list(self.order),
            "total": n,
            "leaves": [
                {
                    "id": leaf.id,
                    "predicate": leaf.predicate,
                    "depth": leaf.depth,
                    "count": leaf.count,
                    "percentage": round(100.0 * leaf.count / n, 4) if n else 0.0,
                }
                for leaf in self.leaves
            ],
        }


def rank_sparse_variables(records: Iterable) -> list[str]:
    """Sparse variables in ascending order of true-flag count."""
    counts = dict.fromkeys(SPARSE_VARIABLES, 0)
    for rec in records:
        for name in SPARSE_VARIABLES:
            if getattr(rec, name):
                counts[name] += 1
    return sorted(SPARSE_VARIABLES, key=lambda v: (counts[v], SPARSE_VARIABLES.index(v)))


def _check_order(order: Sequence[str]) -> tuple[str, ...]:
    order = tuple(order)
    if sorted(order) != sorted(SPARSE_VARIABLES):
        raise ValueError(f"order must be a permutation of {SPARSE_VARIABLES}, got {order}")
    return order


def _leaf_specs(order: tuple[str, ...]) -> list[tuple[str, str, int]]:
    specs = []
    for depth, name in enumerate(order, start=1):
        negs = [f"not {v}" for v in order[: depth - 1]]
        specs.append((name, " and ".join(negs + [name]), depth))
    specs.append((COMMON, " and ".join(f"not {v}" for v in order), len(order)))
    return specs


def _classify(flags, order: Sequence[str]) -> str:
    for name in order:
        if getattr(flags, name):
            return name
    return COMMON


def decompose(records: Sequence, order: Sequence[str] | None = None) -> ScenarioTree:
    """Build the scenario tree; ``order`` defaults to the ranked order."""
    order = _check_order(order if order is not None else rank_sparse_variables(records))
    assignment = tuple(_classify(rec, order) for rec in records)
    counts = dict.fromkeys([s[0] for s in _leaf_specs(order)], 0)
    for sid in assignment:
        counts[sid] += 1
    leaves = tuple(ScenarioLeaf(sid, pred, depth, counts[sid]) for sid, pred, depth in _leaf_specs(order))
    return ScenarioTree(order, leaves, assignment)


def classify_scenario(flags, tree: ScenarioTree | Sequence[str]) -> str:
    """Scenario id of one flag set; the first true flag in split order wins."""
    order = tree.order if isinstance(tree, ScenarioTree) else _check_order(tree)
    return _classify(flags, order)


def common_records(records: Sequence, tree: ScenarioTree | None = None) -> list:
    tree = tree or decompose(records)
    return tree.members(records, COMMON)
