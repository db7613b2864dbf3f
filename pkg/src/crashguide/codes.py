"""Declarative code tables: raw FARS codes to labels and sparse-flag rules."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["VariableTable", "CodeTables", "load_code_tables", "default_code_tables"]

SCHEMA = "crashguide.codetables/1"
UNSPECIFIED_INTERSECTION = "I?"


@dataclass(frozen=True)
class VariableTable:
    name: str
    labels: dict[int, str]
    unknown: frozenset[int]

    def normalize(self, raw: int) -> int | None:
        """Return the code if it is in the declared domain, else None."""
        if raw in self.labels:
            return raw
        return None

    def is_declared(self, raw: int) -> bool:
        return raw in self.labels or raw in self.unknown


@dataclass(frozen=True)
class CodeTables:
    columns: dict[str, str | list[str]]
    optional_columns: frozenset[str]
    variables: dict[str, VariableTable]
    sch_bus_true: frozenset[int]
    work_zone_true: frozenset[int]
    within_interchange_true: frozenset[int]
    bad_weather: frozenset[int]
    crash_factor_absent: frozenset[int]
    intersection_codes: frozenset[int]
    mvit_code: int = 12
    pedestrian_code: int = 8
    rollover_code: int = 1
    source: str = field(default="<builtin>", compare=False)

    def label(self, var: str, code) -> str:
        if code is None:
            return "Unknown"
        if var == "jun_int":
            return self.jun_int_label(code)
        return self.variables[var].labels.get(code, f"code {code}")

    def jun_int_label(self, code: str | None) -> str:
        if code is None:
            return "Unknown"
        if code == UNSPECIFIED_INTERSECTION:
            return "Intersection-Unspecified"
        if code.startswith("I"):
            return self.variables["typ_int"].labels.get(int(code[1:]), f"intersection type {code[1:]}")
        return self.variables["reljct2"].labels.get(int(code), f"junction {code}")

    def column(self, name: str) -> str | list[str]:
        return self.columns[name]


def _int_keys(d: dict) -> dict[int, str]:
    return {int(k): str(v) for k, v in d.items()}


def _parse(doc: dict, source: str) -> CodeTables:
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{source}: expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    variables = {
        name: VariableTable(name, _int_keys(spec.get("labels", {})), frozenset(spec.get("unknown", [])))
        for name, spec in doc["variables"].items()
    }
    required = {"day_of_week", "hour", "func_sys", "rel_road", "reljct1", "reljct2", "typ_int",
                "light_cond", "weather", "work_zone", "sch_bus", "fhe", "mc"}
    missing = required - variables.keys()
    if missing:
        raise ValueError(f"{source}: code tables missing variables {sorted(missing)}")
    flags = doc["flags"]
    events = doc.get("events", {})
    return CodeTables(
        columns=dict(doc["columns"]),
        optional_columns=frozenset(doc.get("optional_columns", [])),
        variables=variables,
        sch_bus_true=frozenset(flags["sch_bus_true"]),
        work_zone_true=frozenset(flags["work_zone_true"]),
        within_interchange_true=frozenset(flags["within_interchange_true"]),
        bad_weather=frozenset(flags["bad_weather"]),
        crash_factor_absent=frozenset(flags["crash_factor_absent"]),
        intersection_codes=frozenset(doc["junction"]["intersection_codes"]),
        mvit_code=int(events.get("motor_vehicle_in_transport", 12)),
        pedestrian_code=int(events.get("pedestrian", 8)),
        rollover_code=int(events.get("rollover", 1)),
        source=source,
    )


def load_code_tables(path: str | Path) -> CodeTables:
    with open(path, "rb") as fh:
        return _parse(tomllib.load(fh), str(path))


_DEFAULT: CodeTables | None = None


def default_code_tables() -> CodeTables:
    """The bundled FARS 2013-2017 tables."""
    global _DEFAULT
    if _DEFAULT is None:
        raw = resources.files("crashguide").joinpath("data/fars_codes.toml").read_bytes()
        _DEFAULT = _parse(tomllib.loads(raw.decode("utf-8")), "<builtin>")
    return _DEFAULT
