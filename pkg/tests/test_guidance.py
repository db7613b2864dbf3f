import json
from datetime import datetime, timedelta
from importlib import resources

import numpy as np
import pytest

from crashguide.clustering import DayPolicy, SpatialCluster, apply_merge_plan
from crashguide.grouping import SpatialKey, partition_groups
from crashguide.guidance import DrivingContext, GuidanceResponse, query, resolve_cluster
from crashguide.mining import (
    FHE,
    MC,
    AttentionRule,
    ClusterEntry,
    FamilyEntry,
    RuleDatabase,
    ScreeningCriteria,
    build_rule_db,
)
from crashguide.pipeline import load_config
from crashguide.scenario import SPARSE_VARIABLES, SparseFlags
from crashguide.tempstats import REFERENCE_SPLIT

from conftest import random_records

KEYS = [(1, 1, 1, 1), (2, 1, 1, 1), (3, 1, 1, 1), (3, 1, 2, 3), (3, 4, 1, 1),
        (4, 1, 4, 1), (5, 5, 1, 1), (6, 1, 2, 2), (7, 1, 3, 1), (7, 4, 8, 3)]


def built_db(policy=DayPolicy.SPLIT, criteria=ScreeningCriteria()):
    groups = list(partition_groups(random_records(3000, seed=2, keys=KEYS)).values())
    clusters = [SpatialCluster(1, tuple(groups[0:3]), policy), SpatialCluster(2, tuple(groups[3:7])),
                SpatialCluster(3, tuple(groups[7:10]))]
    return build_rule_db(clusters, REFERENCE_SPLIT, criteria), clusters


def test_default_plan_sends_local_driveway_to_cluster_2():
    plan = load_config(resources.files("crashguide").joinpath("data/default_config.toml")).merge_plan
    g = partition_groups(random_records(200, seed=1, keys=[(7, 1, 4, 1), (1, 1, 1, 1), (5, 5, 1, 1), (1, 3, 1, 1)]))
    c1 = SpatialCluster(1, (g[SpatialKey(1, 1, "1")],))
    c2 = SpatialCluster(2, ())
    c3 = SpatialCluster(3, ())
    rest = [g[SpatialKey(7, 1, "4")], g[SpatialKey(5, 5, "1")], g[SpatialKey(1, 3, "1")]]
    out = apply_merge_plan([c1, c2, c3], rest, plan)
    assert resolve_cluster(SpatialKey(7, 1, "4"), out) == 2
    assert resolve_cluster(SpatialKey(5, 5, "1"), out) == 3
    assert resolve_cluster(SpatialKey(1, 3, "1"), out) == 4


def test_membership_lookups():
    db, clusters = built_db()
    table = {k: c.id for c in clusters for k in c.member_keys}
    assert len(table) == 10
    for k, cid in table.items():
        assert resolve_cluster(k, db) == cid == resolve_cluster(k, clusters)
    assert resolve_cluster(SpatialKey(None, 1, "1"), db) is None
    assert resolve_cluster(SpatialKey(None, 1, "1"), clusters) is None
    assert resolve_cluster(SpatialKey(9, 9, "9"), db) is None


def test_context_validation():
    k = SpatialKey(3, 1, "1")
    ctx = DrivingContext.at("2019-03-13T06:24:00", k)
    assert (ctx.month, ctx.hour, ctx.day_of_week) == (3, 6, "We")
    with pytest.raises(ValueError):
        DrivingContext(SparseFlags(), k, 13, 0, "Mo")
    with pytest.raises(ValueError):
        DrivingContext(SparseFlags(), k, 1, 24, "Mo")
    with pytest.raises(ValueError):
        DrivingContext(SparseFlags(), k, 1, 0, "Monday")


def when_for(month, hour, day_class):
    """A 2019 datetime in ``month`` at ``hour`` whose day falls in ``day_class``."""
    d = datetime(2019, month, 1, hour)
    while True:
        wd = d.weekday()
        if day_class == "all" or (day_class == "weekday" and wd in (0, 1, 2, 3)) or (day_class == "weekend" and wd == 5):
            return d
        d += timedelta(days=1)


def test_every_rule_is_retrievable():
    db, clusters = built_db(criteria=ScreeningCriteria(min_lift=0.0))
    assert len(db.rules) > 100
    for r in db.rules:
        key = db.cluster(r.cluster_id).members[0]
        resp = query(DrivingContext.at(when_for(r.month, r.hour, r.day_class), key), db)
        assert r in resp.rules
        assert all(x.key == r.key for x in resp.rules)


def test_query_ranking_and_purity():
    db, _ = built_db(criteria=ScreeningCriteria(min_lift=0.0, min_support_type=0.0))
    key = db.cluster(2).members[0]
    ctx = DrivingContext.at("2019-05-15T18:00", key)
    a, b = query(ctx, db), query(ctx, db)
    assert a == b and a.day_class == "all"
    order = [(-r.lift, -r.confidence) for r in a.rules]
    assert order == sorted(order)
    for r in a.rules:
        stored = db.lookup(*r.key)
        assert any(r is s for s in stored)  # same objects, no recomputation
    fam = db.family(2, "all")
    assert a.support_time == fam.spot_counts[4][18] / fam.total


def test_non_common_scenario():
    db, _ = built_db()
    for name in SPARSE_VARIABLES:
        resp = query(DrivingContext.at("2019-03-13T06:00", db.cluster(1).members[0],
                                       SparseFlags.from_mapping({name: True})), db)
        assert resp.scenario == name and resp.rules == () and "outside" in resp.rationale[0]


def test_zero_crash_spot():
    key = SpatialKey(3, 1, "1")
    db = RuleDatabase("d", "c", ScreeningCriteria(), REFERENCE_SPLIT, SPARSE_VARIABLES,
                      (ClusterEntry(1, "whole_week", (key,), 1),),
                      (FamilyEntry(1, "all", 1, tuple(tuple(1 if (i, j) == (0, 0) else 0 for j in range(24))
                                                      for i in range(12)), 0),), ())
    resp = query(DrivingContext.at("2019-07-04T15:00", key), db)
    assert resp.support_time == 0.0 and resp.rules == () and resp.cluster_id == 1


def reference_db():
    """A database holding exactly the reference March 6:00 weekday rules of cluster 2."""
    g = json.loads(resources.files("crashguide").joinpath("data/scene_guidance.json").read_text())
    rules = tuple(AttentionRule.from_json(r) for r in g["rules"])
    key = SpatialKey(7, 1, "4")
    counts = np.zeros((12, 24), int)
    counts[2, 6] = 37
    fam = FamilyEntry(2, "weekday", 10000, tuple(map(tuple, counts.tolist())), 0)
    return RuleDatabase("reference", "", ScreeningCriteria(), REFERENCE_SPLIT, SPARSE_VARIABLES,
                        (ClusterEntry(2, "split", (key,), 10000),), (fam,), rules), key


def test_reference_scene_query():
    db, key = reference_db()
    resp = query(DrivingContext.at("2019-03-13T06:24:00", key), db)
    assert (resp.cluster_id, resp.day_class) == (2, "weekday")
    assert resp.support_time == pytest.approx(0.0037)
    (ped,) = resp.rules_of(FHE)
    (rear,) = resp.rules_of(MC)
    assert (ped.type, ped.confidence, ped.lift) == (8, 0.4244, 1.7114)
    assert (rear.type, rear.confidence, rear.lift) == (1, 0.0988, 1.3668)
    assert resp.rules[0] is ped  # higher lift first
    assert any("conditional on motor-vehicle-in-transport" in line for line in resp.rationale)
    # Friday afternoon is weekend under the split, which holds no rules here
    assert query(DrivingContext.at("2019-03-15T13:00", key), db).rules == ()


def test_response_json_round_trip():
    db, key = reference_db()
    resp = query(DrivingContext.at("2019-03-13T06:24:00", key), db)
    doc = json.loads(json.dumps(resp.to_json()))
    assert [r["label"] for r in doc["rules"]] == ["Pedestrian", "Front-to-Rear"]
    assert GuidanceResponse.from_json(doc) == resp
