"""Parse FARS accident CSV files into normalized crash records.

The normalized dataset is a line-delimited JSON file: one header object
carrying the format name, schema version and record count, followed by one
object per record.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .codes import UNSPECIFIED_INTERSECTION, CodeTables, default_code_tables

__all__ = [
    "CrashRecord",
    "IngestReport",
    "IngestError",
    "DatasetError",
    "parse_crash_csv",
    "parse_crash_files",
    "derive_jun_int",
    "write_dataset",
    "load_dataset",
    "DAYS",
]

DAYS = ("Mo", "Tu", "We", "Th", "Fr", "Sa", "Su")

DATASET_FORMAT = "crashguide.dataset"
DATASET_VERSION = 1


class IngestError(ValueError):
    """A file-level problem that stops ingestion (e.g. a missing column)."""


class DatasetError(ValueError):
    """A normalized dataset file that cannot be trusted."""


@dataclass(frozen=True, slots=True)
class CrashRecord:
    case_id: str
    year: int | None
    month: int
    day_of_week: str | None
    hour: int | None
    func_sys: int | None
    rel_road: int | None
    reljct2: int | None
    typ_int: int | None
    jun_int: str | None
    light_cond: int | None
    weather: int | None
    sch_bus: bool
    work_zone: bool
    within_interchange: bool
    crash_factor: bool
    bad_weather: bool
    fhe: int
    mc: int | None

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in _FIELDS}

    @classmethod
    def from_json(cls, obj: dict) -> "CrashRecord":
        return cls(**{name: obj[name] for name in _FIELDS})


_FIELDS = tuple(CrashRecord.__dataclass_fields__)


@dataclass
class IngestReport:
    rows_read: int = 0
    retained: int = 0
    dropped: list[tuple[int, str]] = field(default_factory=list)
    unmapped: Counter = field(default_factory=Counter)

    @property
    def rows_dropped(self) -> int:
        return len(self.dropped)

    def drop_reasons(self) -> Counter:
        return Counter(reason for _, reason in self.dropped)

    def merge(self, other: "IngestReport") -> None:
        self.rows_read += other.rows_read
        self.retained += other.retained
        self.dropped.extend(other.dropped)
        self.unmapped.update(other.unmapped)

    def to_json(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "retained": self.retained,
            "rows_dropped": self.rows_dropped,
            "drop_reasons": dict(sorted(self.drop_reasons().items())),
            "dropped": [[line, reason] for line, reason in self.dropped],
            "unmapped": {f"{var}={code}": n for (var, code), n in sorted(self.unmapped.items())},
        }


def derive_jun_int(reljct2: int | None, typ_int: int | None, tables: CodeTables | None = None) -> str | None:
    """Merge the intersection type into the junction relation.

    Junction codes outside the intersection branch are echoed as their
    decimal string ("1" for Non-Junction).  Intersection codes are replaced
    by the intersection type, prefixed with ``I`` so the two code spaces
    cannot collide ("I2" is a four-way intersection).  An intersection with
    an unknown type becomes ``"I?"``.  Unknown junction relation gives None.
    """
    tables = tables or default_code_tables()
    if reljct2 is None:
        return None
    if reljct2 in tables.intersection_codes:
        if typ_int is None:
            return UNSPECIFIED_INTERSECTION
        return f"I{typ_int}"
    return str(reljct2)


class _RowError(Exception):
    pass


def _mandatory_columns(tables: CodeTables) -> list[str]:
    names = []
    for logical, col in tables.columns.items():
        if logical in tables.optional_columns:
            continue
        names.extend(col if isinstance(col, list) else [col])
    return names


def _int(row: dict, col: str) -> int:
    raw = row.get(col)
    if raw is None:
        raise _RowError(f"missing value {col}")
    try:
        return int(raw.strip())
    except ValueError:
        try:
            val = float(raw)
        except ValueError:
            raise _RowError(f"non-integer {col}") from None
        if not val.is_integer():
            raise _RowError(f"non-integer {col}") from None
        return int(val)


class _RowParser:
    def __init__(self, tables: CodeTables, header: Sequence[str]):
        self.t = tables
        cols = tables.columns
        present = set(header)
        missing = [c for c in _mandatory_columns(tables) if c not in present]
        if missing:
            raise IngestError(f"missing mandatory column(s): {', '.join(missing)}")
        self.case_col = cols.get("case_id") if cols.get("case_id") in present else None
        self.year_col = cols.get("year") if cols.get("year") in present else None
        cf = cols.get("crash_factors", [])
        self.cf_cols = [c for c in (cf if isinstance(cf, list) else [cf]) if c in present]

    def code(self, row: dict, var: str, report: IngestReport) -> int | None:
        raw = _int(row, self.t.columns[var])
        table = self.t.variables[var]
        if raw in table.labels:
            return raw
        if raw not in table.unknown:
            report.unmapped[(var, raw)] += 1
        return None

    def parse(self, row: dict, line: int, report: IngestReport) -> CrashRecord:
        t = self.t
        if None in row or any(v is None for v in row.values()):
            raise _RowError("field count mismatch")
        month = _int(row, t.columns["month"])
        if not 1 <= month <= 12:
            raise _RowError("month out of range")
        year = None
        if self.year_col is not None and row[self.year_col].strip():
            year = _int(row, self.year_col)
        if self.case_col is not None and row[self.case_col].strip():
            case = row[self.case_col].strip()
            case_id = f"{year}:{case}" if year is not None else case
        else:
            case_id = f"row{line}"

        dow = self.code(row, "day_of_week", report)
        day = t.variables["day_of_week"].labels[dow] if dow is not None else None
        hour = self.code(row, "hour", report)
        reljct2 = self.code(row, "reljct2", report)
        typ_int = self.code(row, "typ_int", report)

        sch_raw = _int(row, t.columns["sch_bus"])
        wz_raw = _int(row, t.columns["work_zone"])
        ri_raw = _int(row, t.columns["reljct1"])
        wea_raw = _int(row, t.columns["weather"])
        for var, raw in (("sch_bus", sch_raw), ("work_zone", wz_raw), ("reljct1", ri_raw)):
            if not t.variables[var].is_declared(raw):
                report.unmapped[(var, raw)] += 1
        weather = self.code(row, "weather", report)

        cf_present = False
        for col in self.cf_cols:
            raw = row[col].strip()
            if not raw:
                continue
            try:
                cf = int(float(raw))
            except ValueError:
                raise _RowError(f"non-integer {col}") from None
            if cf not in t.crash_factor_absent:
                cf_present = True

        fhe = _int(row, t.columns["fhe"])
        if not t.variables["fhe"].is_declared(fhe):
            report.unmapped[("fhe", fhe)] += 1
        mc = None
        if fhe == t.mvit_code:
            mc = _int(row, t.columns["mc"])
            if not t.variables["mc"].is_declared(mc):
                report.unmapped[("mc", mc)] += 1

        return CrashRecord(
            case_id=case_id,
            year=year,
            month=month,
            day_of_week=day,
            hour=hour,
            func_sys=self.code(row, "func_sys", report),
            rel_road=self.code(row, "rel_road", report),
            reljct2=reljct2,
            typ_int=typ_int,
            jun_int=derive_jun_int(reljct2, typ_int, t),
            light_cond=self.code(row, "light_cond", report),
            weather=weather,
            sch_bus=sch_raw in t.sch_bus_true,
            work_zone=wz_raw in t.work_zone_true,
            within_interchange=ri_raw in t.within_interchange_true,
            crash_factor=cf_present,
            bad_weather=wea_raw in t.bad_weather,
            fhe=fhe,
            mc=mc,
        )


def parse_crash_csv(source: IO[str], tables: CodeTables | None = None) -> tuple[list[CrashRecord], IngestReport]:
    """Parse one accident CSV stream.

    Malformed rows are skipped and recorded in the report with their line
    number; a missing mandatory column raises :class:`IngestError`.
    """
    tables = tables or default_code_tables()
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise IngestError("input has no header row")
    header = [h.strip() for h in reader.fieldnames]
    reader.fieldnames = header
    parser = _RowParser(tables, header)
    report = IngestReport()
    records: list[CrashRecord] = []
    for row in reader:
        report.rows_read += 1
        line = reader.line_num
        try:
            records.append(parser.parse(row, line, report))
        except _RowError as exc:
            report.dropped.append((line, str(exc)))
    report.retained = len(records)
    return records, report


def parse_crash_files(paths: Iterable[str | Path], tables: CodeTables | None = None) -> tuple[list[CrashRecord], IngestReport]:
    """Parse several CSV files in the given order and concatenate."""
    records: list[CrashRecord] = []
    total = IngestReport()
    for path in paths:
        with open(path, newline="", encoding="latin-1") as fh:
            recs, rep = parse_crash_csv(fh, tables)
        records.extend(recs)
        total.merge(rep)
    return records, total


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_dataset(records: Sequence[CrashRecord], path: str | Path) -> None:
    header = {"format": DATASET_FORMAT, "version": DATASET_VERSION, "count": len(records),
              "fields": list(_FIELDS)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(header) + "\n")
        for rec in records:
            fh.write(_dump(rec.to_json()) + "\n")


def load_dataset(path: str | Path) -> list[CrashRecord]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise DatasetError(f"{path}: empty file, no header")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: unreadable header") from exc
        if header.get("format") != DATASET_FORMAT:
            raise DatasetError(f"{path}: not a crashguide dataset")
        if header.get("version") != DATASET_VERSION:
            raise DatasetError(f"{path}: dataset version {header.get('version')} != {DATASET_VERSION}")
        records = []
        for n, line in enumerate(fh, start=2):
            try:
                records.append(CrashRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{n}: truncated or corrupt record") from exc
    if len(records) != header["count"]:
        raise DatasetError(f"{path}: expected {header['count']} records, found {len(records)} (truncated?)")
    return records


def records_from_text(text: str, tables: CodeTables | None = None) -> tuple[list[CrashRecord], IngestReport]:
    return parse_crash_csv(io.StringIO(text), tables)
