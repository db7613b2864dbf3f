import dataclasses
import json
from collections import defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crashguide.clustering import DayPolicy, SpatialCluster
from crashguide.grouping import partition_groups
from crashguide.mining import (
    FHE,
    MC,
    OTHER,
    AttentionRule,
    RuleDBError,
    ScreeningCriteria,
    build_rule_db,
    load_rule_db,
    mine_rules,
    save_rule_db,
    screen_rules,
)
from crashguide.tempstats import REFERENCE_SPLIT

from conftest import make_record, random_records


def brute_force(records, kind):
    """Nested-loop tally in exact arithmetic."""
    pop = [r for r in records if r.hour is not None and (kind == FHE or r.fhe == 12)]
    n = len(pop)
    types = sorted({(r.fhe if kind == FHE else r.mc) for r in pop})
    out = {}
    for i in range(1, 13):
        for j in range(24):
            x_ij = sum(1 for r in pop if r.month == i and r.hour == j)
            for k in types:
                x_ijk = sum(1 for r in pop if r.month == i and r.hour == j and (r.fhe if kind == FHE else r.mc) == k)
                if x_ijk == 0:
                    continue
                n_k = sum(1 for r in pop if (r.fhe if kind == FHE else r.mc) == k)
                s = Fraction(x_ij, n)
                s_k = Fraction(n_k, n)
                c = Fraction(x_ijk, x_ij)
                out[(i, j, k)] = (x_ij, x_ijk, n_k, n, s, s_k, c, c / s_k)
    return out


def check_against_oracle(records, kind):
    rules = mine_rules(records, "all", kind)
    ref = brute_force(records, kind)
    assert {(r.month, r.hour, r.type) for r in rules} == set(ref)
    for r in rules:
        x_ij, x_ijk, n_k, n, s, s_k, c, lift = ref[(r.month, r.hour, r.type)]
        assert (r.x_ij, r.x_ijk, r.n_k, r.total) == (x_ij, x_ijk, n_k, n)
        assert Fraction(r.x_ij, r.total) == s and Fraction(r.x_ijk, r.x_ij) == c
        for got, want in ((r.support_time, s), (r.support_type, s_k), (r.confidence, c), (r.lift, lift)):
            assert abs(got - float(want)) <= 1e-12


def test_metrics_match_brute_force():
    recs = random_records(1000, seed=21, unknown_hour=0.02)
    check_against_oracle(recs, FHE)
    check_against_oracle(recs, MC)


def test_pure_spot():
    recs = [make_record(i, month=3, hour=6, fhe=8) for i in range(5)]
    recs += [make_record(10 + i, month=4, hour=i, fhe=1) for i in range(15)]
    (r,) = [r for r in mine_rules(recs, "weekday", FHE) if (r.month, r.hour) == (3, 6)]
    assert r.confidence == 1.0 and r.type == 8
    assert r.lift == pytest.approx(1 / r.support_type) and r.support_type == 0.25 and r.lift == 4.0


def test_mc_population_and_other_bucket():
    recs = [make_record(0, fhe=12, mc=1), make_record(1, fhe=12, mc=77), make_record(2, fhe=8),
            make_record(3, fhe=555), make_record(4, fhe=12, mc=1, hour=None)]
    mc = mine_rules(recs, "all", MC)
    assert {r.type for r in mc} == {1, OTHER} and all(r.total == 2 for r in mc)
    fhe = mine_rules(recs, "all", FHE)
    assert {r.type for r in fhe} == {12, 8, OTHER} and all(r.total == 4 for r in fhe)
    with pytest.raises(ValueError):
        mine_rules(recs, "all", "XX")


def test_empty_population():
    assert mine_rules([], "all", FHE) == []
    assert mine_rules([make_record(0, fhe=8)], "all", MC) == []


def rule(**kw):
    base = dict(cluster_id=1, day_class="all", month=1, hour=0, kind=FHE, type=8, x_ij=1, x_ijk=1, n_k=1, total=1,
                support_time=0.01, support_type=0.1, confidence=0.5, lift=2.0)
    base.update(kw)
    return AttentionRule(**base)


def test_screen_boundaries():
    crit = ScreeningCriteria()
    assert not crit.accepts(rule(lift=1.0))
    assert crit.accepts(rule(lift=1.0 + 1e-12))
    assert crit.accepts(rule(support_time=1 / 288)) and not crit.accepts(rule(support_time=1 / 288 - 1e-15))
    assert crit.accepts(rule(support_type=0.05)) and not crit.accepts(rule(support_type=0.0499))
    with pytest.raises(ValueError):
        ScreeningCriteria(min_lift=-1)


def test_screen_matches_predicate(rng):
    rules = [rule(hour=i % 24, support_time=float(a), support_type=float(b), lift=float(c))
             for i, (a, b, c) in enumerate(zip(rng.random(300) * 0.01, rng.random(300) * 0.2, rng.random(300) * 3))]
    kept = screen_rules(rules)
    oracle = [r for r in rules if r.support_time >= 1 / 288 and r.support_type >= 0.05 and r.lift > 1]
    assert kept == oracle and 0 < len(kept) < len(rules)


crit_st = st.builds(ScreeningCriteria, st.floats(0, 0.02), st.floats(0, 0.3), st.floats(0, 3))


@settings(max_examples=40, deadline=None)
@given(crit_st, st.floats(0, 0.01), st.floats(0, 0.1), st.floats(0, 1))
def test_screen_monotone(c, d1, d2, d3):
    rules = mine_rules(random_records(300, seed=4), "all", FHE)
    tighter = ScreeningCriteria(c.min_support_time + d1, c.min_support_type + d2, c.min_lift + d3)
    assert set(screen_rules(rules, tighter)) <= set(screen_rules(rules, c))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 600), st.integers(0, 10_000))
def test_completeness_and_consistency(n, seed):
    recs = random_records(n, seed=seed, unknown_hour=0.05, fhe_codes=(12, 8, 1, 42, 9, 555))
    for kind in (FHE, MC):
        rules = mine_rules(recs, "all", kind)
        by_spot = defaultdict(list)
        by_type = defaultdict(list)
        for r in rules:
            by_spot[(r.month, r.hour)].append(r)
            by_type[r.type].append(r)
        for spot, rs in by_spot.items():
            assert abs(sum(r.confidence for r in rs) - 1.0) <= 1e-12
            assert sum(r.x_ijk for r in rs) == rs[0].x_ij
        for k, rs in by_type.items():
            assert abs(sum(r.support_time * r.confidence for r in rs) - rs[0].support_type) <= 1e-12
            assert sum(Fraction(r.x_ij, r.total) * Fraction(r.x_ijk, r.x_ij) for r in rs) == Fraction(rs[0].n_k, rs[0].total)
        for r in rules:
            assert 0 <= r.confidence <= 1 and r.lift >= 0 and r.lift == r.confidence / r.support_type


def small_clusters():
    recs = random_records(2000, seed=8)
    groups = list(partition_groups(recs).values())
    c1 = SpatialCluster(1, tuple(groups[:2]), DayPolicy.SPLIT)
    c2 = SpatialCluster(2, tuple(groups[2:]))
    return [c1, c2]


def test_build_db_families_and_index():
    db = build_rule_db(small_clusters(), REFERENCE_SPLIT, ScreeningCriteria(min_lift=0.0))
    assert db.family_keys() == [(1, "weekday"), (1, "weekend"), (2, "all")]
    assert {r.day_class for r in db.rules if r.cluster_id == 1} == {"weekday", "weekend"}
    r = db.rules[17]
    assert r in db.lookup(r.cluster_id, r.day_class, r.month, r.hour)
    assert all(x.key == r.key for x in db.lookup(*r.key))
    fam = db.family(r.cluster_id, r.day_class)
    if r.kind == FHE:
        assert fam.support_time(r.month, r.hour) == r.support_time
    assert sum(map(sum, fam.spot_counts)) == fam.total


def test_empty_db_is_valid(tmp_path):
    db = build_rule_db([], REFERENCE_SPLIT)
    assert db.rules == () and db.families == ()
    save_rule_db(db, tmp_path / "r.json")
    assert load_rule_db(tmp_path / "r.json") == db


def test_db_round_trip(tmp_path):
    db = build_rule_db(small_clusters(), REFERENCE_SPLIT, dataset_id="x", config_hash="y")
    save_rule_db(db, tmp_path / "r.json")
    back = load_rule_db(tmp_path / "r.json")
    assert back == db and back.rules == db.rules
    save_rule_db(back, tmp_path / "s.json")
    assert (tmp_path / "r.json").read_bytes() == (tmp_path / "s.json").read_bytes()


def test_db_bad_files(tmp_path):
    db = build_rule_db([], REFERENCE_SPLIT)
    doc = db.to_json()
    p = tmp_path / "r.json"
    p.write_text(json.dumps({**doc, "version": 2}))
    with pytest.raises(RuleDBError):
        load_rule_db(p)
    p.write_text(json.dumps({k: v for k, v in doc.items() if k != "rules"}))
    with pytest.raises(RuleDBError):
        load_rule_db(p)
    p.write_text("{")
    with pytest.raises(RuleDBError):
        load_rule_db(p)


def test_rule_json_round_trip():
    r = rule()
    assert AttentionRule.from_json(json.loads(json.dumps(r.to_json()))) == r
    assert dataclasses.replace(r, lift=3.0).key == r.key
