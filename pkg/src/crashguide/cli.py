"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .clustering import PlanError
from .codes import load_code_tables, default_code_tables
from .grouping import SpatialKey, filter_by_size, groups_summary, partition_groups
from .guidance import DrivingContext, GuidanceResponse, query
from .ingest import DatasetError, IngestError, derive_jun_int, load_dataset, parse_crash_files, write_dataset
from .mining import RuleDBError, build_rule_db, load_rule_db, save_rule_db
from .pipeline import (
    GROUP_FIELDS,
    ConfigError,
    PipelineConfig,
    PipelineError,
    _csv_text,
    _write_json,
    cluster_groups,
    clusters_csv,
    config_from_mapping,
    load_config,
    run_pipeline,
)
from .render import render_heatmap, render_rule_grid
from .scenario import COMMON, SPARSE_VARIABLES, SparseFlags, decompose
from .scene import SceneError, apply_attention, load_frame
from .tempstats import UndefinedStatistic, month_hour_histogram, optimize_week_split, week_hour_series

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DATA_ERRORS = (IngestError, DatasetError, RuleDBError, SceneError, PlanError, ConfigError,
               UndefinedStatistic, FileNotFoundError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return config_from_mapping({"clustering": {"merge_plan": []}})


def _tables(args):
    return load_code_tables(args.tables) if getattr(args, "tables", None) else default_code_tables()


def _common(dataset: str):
    records = load_dataset(dataset)
    tree = decompose(records)
    return records, tree, tree.members(records, COMMON)


def cmd_ingest(args) -> int:
    records, report = parse_crash_files(args.csv, _tables(args))
    write_dataset(records, args.out)
    if args.report:
        _write_json(Path(args.report), report.to_json())
    print(f"read {report.rows_read}, retained {report.retained}, dropped {report.rows_dropped}", file=sys.stderr)
    return EXIT_OK


def cmd_decompose(args) -> int:
    records = load_dataset(args.dataset)
    _emit(_json(decompose(records).summary()), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    _, _, common = _common(args.dataset)
    series = week_hour_series(common)
    split = optimize_week_split(series)
    _emit(_json({**split.to_json(), "weekday": f"Sunday {split.q + 1}:00 to Friday {split.p}:59",
                 "weekend": f"Friday {split.p + 1}:00 to Sunday {split.q}:59"}), args.out)
    return EXIT_OK


def cmd_group(args) -> int:
    _, _, common = _common(args.dataset)
    groups = partition_groups(common)
    large, _ = filter_by_size(groups, args.threshold)
    print(f"{len(groups)} groups, {len(large)} with size > {args.threshold}", file=sys.stderr)
    _emit(_csv_text(groups_summary(groups, default_code_tables()), GROUP_FIELDS), args.out)
    return EXIT_OK


def _clustered(args):
    cfg = _config(args)
    records, tree, common = _common(args.dataset)
    split = cfg.split or optimize_week_split(week_hour_series(common))
    outcome = cluster_groups(partition_groups(common), split, cfg)
    return cfg, tree, split, outcome


def cmd_cluster(args) -> int:
    _, _, _, outcome = _clustered(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "clusters.csv").write_text(clusters_csv(outcome.clusters, default_code_tables()), encoding="utf-8")
    _write_json(out / "dendrogram.json", outcome.trace.to_json())
    for c in outcome.clusters:
        print(f"cluster {c.id}: {len(c.groups)} groups, {c.size} crashes, {c.day_policy.value}", file=sys.stderr)
    return EXIT_OK


def cmd_mine(args) -> int:
    cfg, tree, split, outcome = _clustered(args)
    db = build_rule_db(outcome.clusters, split, cfg.screening, cfg.tables(),
                       dataset_id=Path(args.dataset).name, config_hash=cfg.config_hash(),
                       scenario_order=tree.order)
    save_rule_db(db, args.out)
    print(f"{len(db.rules)} rules in {len(db.families)} families", file=sys.stderr)
    return EXIT_OK


def _flags(names) -> SparseFlags:
    return SparseFlags.from_mapping({n: True for n in names or ()})


def _key(args) -> SpatialKey:
    if args.jun_int is not None:
        jun = args.jun_int
    elif args.reljct2 is not None:
        jun = derive_jun_int(args.reljct2, args.typ_int)
    else:
        raise ConfigError("give --jun-int or --reljct2 (with --typ-int for intersections)")
    return SpatialKey(args.func_sys, args.rel_road, jun)


def _text_table(resp: GuidanceResponse, tables) -> str:
    lines = [f"scenario    {resp.scenario}", f"cluster     {resp.cluster_id}", f"day class   {resp.day_class}",
             f"support     {resp.support_time:.6f}", ""]
    if resp.rules:
        lines.append(f"{'kind':<5} {'type':<34} {'conf':>8} {'lift':>8}")
        for r in resp.rules:
            label = tables.label("fhe" if r.kind == "FHE" else "mc", r.type) if r.type >= 0 else "Other"
            lines.append(f"{r.kind:<5} {label[:34]:<34} {r.confidence:>8.4f} {r.lift:>8.4f}")
    else:
        lines.append("no rules")
    lines.append("")
    lines.extend(resp.rationale)
    return "\n".join(lines) + "\n"


def cmd_query(args) -> int:
    db = load_rule_db(args.db)
    ctx = DrivingContext.at(args.timestamp, _key(args), _flags(args.flag))
    resp = query(ctx, db)
    tables = default_code_tables()
    _emit(_json(resp.to_json(tables)) if args.format == "json" else _text_table(resp, tables), args.out)
    return EXIT_OK


def cmd_analyze_scene(args) -> int:
    frame = load_frame(args.frame)
    cfg = _config(args)
    if args.guidance:
        guidance = GuidanceResponse.from_json(json.loads(Path(args.guidance).read_text(encoding="utf-8")))
    elif args.db:
        loc = frame.location or {}
        if frame.timestamp is None or not {"func_sys", "rel_road"} <= set(loc):
            raise SceneError("frame needs timestamp and location codes to query a rule database")
        jun = loc.get("jun_int") or derive_jun_int(loc.get("reljct2"), loc.get("typ_int"))
        key = SpatialKey(loc["func_sys"], loc["rel_road"], jun)
        flags = SparseFlags.from_mapping(frame.flags or {})
        guidance = query(DrivingContext.at(frame.timestamp, key, flags), load_rule_db(args.db))
    else:
        raise ConfigError("give --db or --guidance")
    scene = apply_attention(frame, guidance, cfg.calibration)
    _emit(_json(scene.to_json()), args.out)
    return EXIT_OK


def cmd_render(args) -> int:
    if args.what == "heatmap":
        records, _, common = _common(args.dataset)
        grid = month_hour_histogram(common if args.common else records)
        _emit(render_heatmap(grid, args.title or Path(args.dataset).name), args.out)
    else:
        db = load_rule_db(args.db)
        rules = [r for r in db.rules if r.cluster_id == args.cluster and r.day_class == args.day_class
                 and r.kind == args.kind]
        _emit(render_rule_grid(rules, args.title or f"cluster {args.cluster} {args.day_class} {args.kind}",
                               args.type), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg.output_dir = Path(args.out_dir)
    result = run_pipeline(cfg)
    print(f"wrote {len(result.manifest['files'])} files to {result.output_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_default_config(args) -> int:
    _emit(resources.files("crashguide").joinpath("data/default_config.toml").read_text(encoding="utf-8"), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crashguide", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse accident CSV files into a normalized dataset")
    s.add_argument("csv", nargs="+")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--tables", help="code table TOML (default: bundled FARS tables)")
    s.add_argument("--report", help="write the ingest report JSON here")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("decompose", help="scenario tree summary as JSON")
    s.add_argument("dataset")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("split", help="optimize the Friday/Sunday weekday-weekend split")
    s.add_argument("dataset")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("group", help="spatial groups summary CSV (key, size, Moran's I)")
    s.add_argument("dataset")
    s.add_argument("--threshold", type=int, default=100)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_group)

    s = sub.add_parser("cluster", help="cluster membership CSV and dendrogram trace JSON")
    s.add_argument("dataset")
    s.add_argument("--config")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("mine", help="mine and screen rules into a rule database")
    s.add_argument("dataset")
    s.add_argument("--config")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("query", help="attention guidance for a driving context")
    s.add_argument("--db", required=True)
    s.add_argument("--func-sys", type=int, required=True)
    s.add_argument("--rel-road", type=int, required=True)
    s.add_argument("--jun-int", help="merged junction code, e.g. 1 or I2")
    s.add_argument("--reljct2", type=int)
    s.add_argument("--typ-int", type=int)
    s.add_argument("--timestamp", required=True, help="ISO time, e.g. 2019-03-13T06:24")
    s.add_argument("--flag", action="append", choices=SPARSE_VARIABLES, help="set a scenario flag (repeatable)")
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("analyze-scene", help="annotate one detection frame with rule-guided attention")
    s.add_argument("frame")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--db")
    g.add_argument("--guidance", help="a saved guidance response JSON")
    s.add_argument("--config", help="pipeline config providing [calibration]")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_analyze_scene)

    s = sub.add_parser("render", help="SVG heatmap or rule dot grid")
    rs = s.add_subparsers(dest="what", required=True, parser_class=_Parser)
    h = rs.add_parser("heatmap")
    h.add_argument("dataset")
    h.add_argument("--common", action="store_true", help="only the common scenario")
    h.add_argument("--title")
    h.add_argument("-o", "--out")
    r = rs.add_parser("rules")
    r.add_argument("--db", required=True)
    r.add_argument("--cluster", type=int, required=True)
    r.add_argument("--day-class", default="all", choices=("all", "weekday", "weekend"))
    r.add_argument("--kind", default="FHE", choices=("FHE", "MC"))
    r.add_argument("--type", type=int)
    r.add_argument("--title")
    r.add_argument("-o", "--out")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("run", help="full pipeline from a config file")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("default-config", help="print the default pipeline config")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_default_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"crashguide: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DATA_ERRORS + (ValueError, OSError)) else EXIT_INTERNAL
    except DATA_ERRORS as exc:
        print(f"crashguide: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"crashguide: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover
        print(f"crashguide: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
