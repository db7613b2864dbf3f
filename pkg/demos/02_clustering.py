"""
Clustering spatial groups by temporal similarity
================================================

Large groups are merged greedily by Pearson's r between their month-hour
grids.  Leftovers are assigned by a merge plan and each cluster decides
whether to keep separate weekday and weekend patterns.
"""

import tempfile
from pathlib import Path

from crashguide.ingest import parse_crash_files
from crashguide.synth import PLANTED_SITES, generate, write_csv
from crashguide.scenario import common_records
from crashguide.grouping import filter_by_size, partition_groups
from crashguide.clustering import (MergePlan, StopCriterion, agglomerate, apply_merge_plan,
                                   finalize_clusters, number_step1_clusters)
from crashguide.tempstats import optimize_week_split, week_hour_series

data = generate(20_000, seed=2)
path = Path(tempfile.mkdtemp()) / "crashes.csv"
write_csv(data.rows, path)
records, _ = parse_crash_files([path])
common = common_records(records)
split = optimize_week_split(week_hour_series(common))

groups = partition_groups(common)
large, small = filter_by_size(groups, 100)
print(len(large), "large groups,", len(small), "small ones")

# step one: merge while the best pair still has r >= 0.55
step1, trace = agglomerate(list(large.values()), StopCriterion(min_r=0.55))
for e in trace.events:
    print(f"  merge {e.left:2d} + {e.right:2d} -> {e.new:2d}   r = {e.r:.3f}")
print("stopped:", trace.stop_reason)

clusters, singles = number_step1_clusters(step1)
print("\nplanted sites:", PLANTED_SITES)
for c in clusters:
    print(f"cluster {c.id}: {c.size} crashes over", sorted(tuple(k) for k in c.member_keys))

# step two: everything left over goes to a residual cluster here
rest = singles + list(small.values())
final = finalize_clusters(apply_merge_plan(clusters, rest, MergePlan()), split)
for c in final:
    s = c.stats
    print(f"cluster {c.id}: {c.day_policy.value:10s} I whole {s['i_whole']:.2f}",
          f"weekday {s['i_weekday']:.2f} weekend {s['i_weekend']:.2f}" if s["i_weekday"] is not None else "")
