"""Config-driven end-to-end run: ingest -> decompose -> split -> group ->
cluster -> mine, with every output hashed into a manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .clustering import (
    ClusteringError,
    DendrogramTrace,
    MergePlan,
    SpatialCluster,
    StopCriterion,
    agglomerate,
    apply_merge_plan,
    finalize_clusters,
    number_step1_clusters,
)
from .codes import CodeTables, default_code_tables, load_code_tables
from .grouping import SpatialGroup, SpatialKey, filter_by_size, groups_summary, partition_groups
from .ingest import CrashRecord, IngestReport, parse_crash_files, write_dataset
from .mining import MC, FHE, RuleDatabase, ScreeningCriteria, build_rule_db, save_rule_db
from .render import render_heatmap, render_rule_grid
from .scenario import COMMON, ScenarioTree, decompose
from .scene import Calibration
from .tempstats import WeekSplit, optimize_week_split, week_hour_series

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "PipelineError",
    "PipelineConfig",
    "PipelineResult",
    "load_config",
    "config_from_mapping",
    "cluster_groups",
    "run_pipeline",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    inputs: list[Path]
    output_dir: Path
    code_tables: Path | None = None
    size_threshold: int = 100
    strict_size: bool = True
    stop: StopCriterion = field(default_factory=StopCriterion)
    merge_plan: MergePlan = field(default_factory=MergePlan)
    i_threshold: float = 0.7
    r_threshold: float | None = None
    screening: ScreeningCriteria = field(default_factory=ScreeningCriteria)
    calibration: Calibration = field(default_factory=Calibration)
    split: WeekSplit | None = None  # None: optimize from the data
    render: bool = True

    def validate(self) -> None:
        for p in self.inputs:
            if not Path(p).is_file():
                raise ConfigError(f"input file not found: {p}")
        if self.code_tables is not None and not Path(self.code_tables).is_file():
            raise ConfigError(f"code table file not found: {self.code_tables}")
        if self.size_threshold < 0:
            raise ConfigError("size_threshold must be >= 0")
        if not 0.0 <= self.i_threshold <= 1.0:
            raise ConfigError("day-policy i_threshold must lie in [0, 1]")
        if self.stop.min_r is not None and not -1.0 <= self.stop.min_r <= 1.0:
            raise ConfigError("stop min_r must lie in [-1, 1]")
        s = self.screening
        if not (0 <= s.min_support_time <= 1 and 0 <= s.min_support_type <= 1):
            raise ConfigError("screening supports must lie in [0, 1]")

    def tables(self) -> CodeTables:
        return load_code_tables(self.code_tables) if self.code_tables else default_code_tables()

    def semantic_json(self) -> dict:
        """Parameters that affect results; paths are excluded so the hash
        only moves when the analysis does."""
        return {
            "size_threshold": self.size_threshold,
            "strict_size": self.strict_size,
            "stop": {"min_r": self.stop.min_r, "n_clusters": self.stop.n_clusters},
            "merge_plan": self.merge_plan.to_json(),
            "i_threshold": self.i_threshold,
            "r_threshold": self.r_threshold,
            "screening": self.screening.to_json(),
            "split": None if self.split is None else {"p": self.split.p, "q": self.split.q},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def config_from_mapping(doc: Mapping[str, Any], base: Path = Path(".")) -> PipelineConfig:
    def path(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        inp = doc.get("input", {})
        grp = doc.get("grouping", {})
        clu = doc.get("clustering", {})
        day = doc.get("day_policy", {})
        scr = doc.get("screening", {})
        spl = doc.get("split", {})
        out = doc.get("output", {})
        stop = StopCriterion(min_r=clu.get("min_r", 0.55) if clu.get("min_r", 0.55) != "none" else None,
                             n_clusters=clu.get("n_clusters"))
        plan = MergePlan.from_config(clu.get("merge_plan", []), clu.get("residual_id"))
        split = None
        if spl.get("mode", "optimize") == "fixed":
            split = WeekSplit(int(spl["p"]), int(spl["q"]))
        elif spl.get("mode", "optimize") != "optimize":
            raise ConfigError(f"split.mode must be 'optimize' or 'fixed', got {spl.get('mode')!r}")
        cfg = PipelineConfig(
            inputs=[path(p) for p in inp.get("paths", [])],
            code_tables=path(inp["code_tables"]) if inp.get("code_tables") else None,
            output_dir=path(out.get("dir", "out")),
            size_threshold=int(grp.get("size_threshold", 100)),
            strict_size=bool(grp.get("strict", True)),
            stop=stop,
            merge_plan=plan,
            i_threshold=float(day.get("i_threshold", 0.7)),
            r_threshold=day.get("r_threshold"),
            screening=ScreeningCriteria(
                min_support_time=float(scr.get("min_support_time", 1.0 / 288.0)),
                min_support_type=float(scr.get("min_support_type", 0.05)),
                min_lift=float(scr.get("min_lift", 1.0)),
            ),
            calibration=Calibration.from_config(doc.get("calibration", {})),
            split=split,
            render=bool(out.get("render", True)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(doc, path.parent)


@dataclass
class ClusteringOutcome:
    clusters: list[SpatialCluster]
    trace: DendrogramTrace
    step1_ids: list[int]
    excluded: list[SpatialGroup]  # sentinel-key groups


def cluster_groups(groups: Mapping[SpatialKey, SpatialGroup], split: WeekSplit, cfg: PipelineConfig) -> ClusteringOutcome:
    """Both clustering steps plus the day-policy decision."""
    excluded = [g for k, g in groups.items() if k.is_sentinel]
    usable = {k: g for k, g in groups.items() if not k.is_sentinel}
    large, small = filter_by_size(usable, cfg.size_threshold, cfg.strict_size)
    trace = DendrogramTrace(leaves=list(large))
    step1: list[tuple[SpatialGroup, ...]] = [(g,) for g in large.values()]
    if len(large) >= 2:
        try:
            step1, trace = agglomerate(large, cfg.stop)
        except ClusteringError as exc:
            trace.stop_reason = str(exc)
    else:
        trace.stop_reason = "fewer than two large groups"
    clusters, singles = number_step1_clusters(step1)
    remaining = sorted(singles + list(small.values()), key=lambda g: g.key.sort_key())
    final = apply_merge_plan(clusters, remaining, cfg.merge_plan)
    final = finalize_clusters(final, split, cfg.i_threshold, cfg.r_threshold)
    return ClusteringOutcome(final, trace, [c.id for c in clusters], excluded)


@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict
    records: list[CrashRecord]
    report: IngestReport
    tree: ScenarioTree
    split: WeekSplit
    groups: dict[SpatialKey, SpatialGroup]
    clustering: ClusteringOutcome
    db: RuleDatabase


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dataset_id(paths: Sequence[Path]) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(_sha256(Path(p)).encode())
    return h.hexdigest()[:16]


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _csv_text(rows: Sequence[Mapping], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def clusters_csv(clusters: Sequence[SpatialCluster], tables: CodeTables) -> str:
    rows = []
    for c in clusters:
        for g in c.groups:
            rows.append({"cluster_id": c.id, "day_policy": c.day_policy.value, "func_sys": g.key.func_sys,
                         "rel_road": g.key.rel_road, "jun_int": g.key.jun_int, "size": g.size,
                         "morans_i": g.morans_i,
                         "label": ", ".join((tables.label("func_sys", g.key.func_sys),
                                             tables.label("rel_road", g.key.rel_road),
                                             tables.jun_int_label(g.key.jun_int)))})
    return _csv_text(rows, ["cluster_id", "day_policy", "func_sys", "rel_road", "jun_int", "size", "morans_i", "label"])


GROUP_FIELDS = ["func_sys", "rel_road", "jun_int", "size", "morans_i", "sentinel", "label"]


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage, write artifacts under ``cfg.output_dir``, return
    the in-memory results and the manifest."""
    stage = "config"
    try:
        cfg.validate()
        tables = cfg.tables()
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []

        stage = "ingest"
        records, report = parse_crash_files(cfg.inputs, tables)
        write_dataset(records, out / "dataset.jsonl")
        _write_json(out / "ingest_report.json", report.to_json())
        written += [out / "dataset.jsonl", out / "ingest_report.json"]

        stage = "decompose"
        tree = decompose(records)
        common = tree.members(records, COMMON)
        _write_json(out / "scenario_tree.json", tree.summary())
        written.append(out / "scenario_tree.json")

        stage = "split"
        series = week_hour_series(common)
        optimized = optimize_week_split(series)
        split = cfg.split or optimized
        _write_json(out / "week_split.json", {"used": {"p": split.p, "q": split.q},
                                              "optimized": optimized.to_json(),
                                              "week_hour_series": series.tolist()})
        written.append(out / "week_split.json")

        stage = "group"
        groups = partition_groups(common)
        (out / "groups.csv").write_text(_csv_text(groups_summary(groups, tables), GROUP_FIELDS), encoding="utf-8")
        written.append(out / "groups.csv")

        stage = "cluster"
        outcome = cluster_groups(groups, split, cfg)
        (out / "clusters.csv").write_text(clusters_csv(outcome.clusters, tables), encoding="utf-8")
        _write_json(out / "dendrogram.json", outcome.trace.to_json())
        _write_json(out / "cluster_stats.json", [{"id": c.id, "size": c.size, "groups": len(c.groups),
                                                  "step1": c.id in outcome.step1_ids, **c.stats}
                                                 for c in outcome.clusters])
        written += [out / "clusters.csv", out / "dendrogram.json", out / "cluster_stats.json"]

        stage = "mine"
        db = build_rule_db(outcome.clusters, split, cfg.screening, tables,
                           dataset_id=_dataset_id(cfg.inputs), config_hash=cfg.config_hash(),
                           scenario_order=tree.order)
        save_rule_db(db, out / "rules.json")
        written.append(out / "rules.json")

        if cfg.render:
            stage = "render"
            svg_dir = out / "svg"
            svg_dir.mkdir(exist_ok=True)
            for c in outcome.clusters:
                p = svg_dir / f"heatmap_cluster{c.id}.svg"
                p.write_text(render_heatmap(c.grid, f"cluster {c.id}: {c.size} crashes"), encoding="utf-8")
                written.append(p)
            for cid, dc in db.family_keys():
                for kind in (FHE, MC):
                    fam_rules = [r for r in db.rules if r.cluster_id == cid and r.day_class == dc and r.kind == kind]
                    for t in sorted({r.type for r in fam_rules}):
                        label = tables.label("fhe" if kind == FHE else "mc", t) if t >= 0 else "Other"
                        p = svg_dir / f"rules_c{cid}_{dc}_{kind}_{t}.svg"
                        p.write_text(render_rule_grid(fam_rules, f"cluster {cid} {dc} {kind}: {label}", t),
                                     encoding="utf-8")
                        written.append(p)

        stage = "report"
        common_n = len(common)
        large, _ = filter_by_size({k: g for k, g in groups.items()}, cfg.size_threshold, cfg.strict_size)
        summary = {
            "dataset_id": db.dataset_id,
            "config_hash": db.config_hash,
            "records": len(records),
            "common": common_n,
            "common_pct": round(100.0 * common_n / len(records), 4) if records else 0.0,
            "groups": len(groups),
            "large_groups": len(large),
            "large_group_crashes": sum(g.size for g in large.values()),
            "split": {"p": split.p, "q": split.q},
            "clusters": [{"id": c.id, "size": c.size, "day_policy": c.day_policy.value} for c in outcome.clusters],
            "excluded_sentinel_crashes": sum(g.size for g in outcome.excluded),
            "families": [f"{cid}-{dc}" for cid, dc in db.family_keys()],
            "rules": len(db.rules),
        }
        _write_json(out / "report.json", summary)
        written.append(out / "report.json")

        stage = "manifest"
        manifest = {
            "dataset_id": db.dataset_id,
            "config_hash": db.config_hash,
            "files": {p.relative_to(out).as_posix(): _sha256(p) for p in sorted(written)},
        }
        _write_json(out / "manifest.json", manifest)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    return PipelineResult(out, manifest, records, report, tree, split, groups, outcome, db)
