"""
Mining attention rules and querying them
========================================

Each cluster and day class gets month-hour rules for the first harmful
event and for the manner of collision.  A driving context then pulls the
rules for its place and time.
"""

import tempfile
from pathlib import Path

from crashguide.synth import generate, write_csv
from crashguide.pipeline import config_from_mapping, run_pipeline
from crashguide.guidance import DrivingContext, query
from crashguide.grouping import SpatialKey
from crashguide.mining import FHE

out = Path(tempfile.mkdtemp())
data = generate(30_000, seed=4)
write_csv(data.rows, out / "crashes.csv")
cfg = config_from_mapping({"input": {"paths": [str(out / "crashes.csv")]},
                           "output": {"dir": str(out / "run"), "render": False},
                           "clustering": {"merge_plan": []}})
res = run_pipeline(cfg)
print(len(res.db.rules), "screened rules in", len(res.db.families), "families")

# the generator boosts one crash type at one spot of the planted cluster
month, hour = data.truth.spot
print(f"\nplanted: type {data.truth.fhe_type} at month {month}, {hour}:00, lift {data.truth.lift}")
for r in res.db.rules:
    if (r.cluster_id, r.month, r.hour, r.kind) == (1, month, hour, FHE):
        print(f"  {r.day_class:8s} type {r.type:3d}  S {r.support_time:.4f}  C {r.confidence:.3f}  L {r.lift:.3f}")

# a car driving through a planted site on a weekday evening in that month
f, rr, _, _ = data.truth.sites[0]
ctx = DrivingContext.at(f"2019-{month:02d}-16T{hour:02d}:10", SpatialKey(f, rr, "1"))
resp = query(ctx, res.db)
print()
print("\n".join(resp.rationale))
for r in resp.rules:
    print(f"  {r.kind} {r.type}: confidence {r.confidence:.3f}, lift {r.lift:.3f}")
