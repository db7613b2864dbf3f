"""Scenario-wise, spatio-temporal attention guidance mined from fatal-crash reports."""

__version__ = "0.1.0"

from .codes import CodeTables, default_code_tables, load_code_tables
from .ingest import CrashRecord, IngestReport, derive_jun_int, load_dataset, parse_crash_csv, write_dataset
from .scenario import SparseFlags, classify_scenario, decompose, rank_sparse_variables
from .tempstats import (
    DayClass,
    TemporalGrid,
    UndefinedStatistic,
    WeekSplit,
    day_class,
    month_hour_histogram,
    morans_i,
    optimize_week_split,
    pearson_r,
    queen_weights,
)
from .grouping import SpatialKey, filter_by_size, partition_groups
from .clustering import MergePlan, StopCriterion, agglomerate, apply_merge_plan, decide_day_policy
from .mining import AttentionRule, ScreeningCriteria, build_rule_db, load_rule_db, mine_rules, save_rule_db, screen_rules
from .guidance import DrivingContext, GuidanceResponse, query, resolve_cluster
from .scene import Calibration, apply_attention, estimate_distance, flag_risky_pedestrians, lane_bounding_rectangle
from .pipeline import PipelineConfig, load_config, run_pipeline

__all__ = [
    "__version__", "CodeTables", "default_code_tables", "load_code_tables", "CrashRecord",
    "IngestReport", "derive_jun_int", "load_dataset", "parse_crash_csv", "write_dataset",
    "SparseFlags", "classify_scenario", "decompose", "rank_sparse_variables", "DayClass",
    "TemporalGrid", "UndefinedStatistic", "WeekSplit", "day_class", "month_hour_histogram",
    "morans_i", "optimize_week_split", "pearson_r", "queen_weights", "SpatialKey", "filter_by_size",
    "partition_groups", "MergePlan", "StopCriterion", "agglomerate", "apply_merge_plan",
    "decide_day_policy", "AttentionRule", "ScreeningCriteria", "build_rule_db", "load_rule_db",
    "mine_rules", "save_rule_db", "screen_rules", "DrivingContext", "GuidanceResponse", "query",
    "resolve_cluster", "Calibration", "apply_attention", "estimate_distance",
    "flag_risky_pedestrians", "lane_bounding_rectangle", "PipelineConfig", "load_config",
    "run_pipeline",
]
