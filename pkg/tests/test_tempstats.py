import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from crashguide.ingest import DAYS
from crashguide.tempstats import (
    REFERENCE_SPLIT,
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
    split_objectives,
    week_hour_series,
)

from conftest import make_record, random_records


# -- grids ---------------------------------------------------------------

def test_empty_grid():
    g = month_hour_histogram([])
    assert g == TemporalGrid.zeros() and g.total == 0


def test_one_per_spot():
    recs = [make_record(k, month=m, hour=h) for k, (m, h) in enumerate(itertools.product(range(1, 13), range(24)))]
    assert np.array_equal(month_hour_histogram(recs).counts, np.ones((12, 24)))


def test_grid_matches_tally():
    recs = random_records(1000, seed=7, unknown_hour=0.03)
    tally = {}
    for r in recs:
        if r.hour is not None:
            tally[(r.month, r.hour)] = tally.get((r.month, r.hour), 0) + 1
    g = month_hour_histogram(recs)
    for m in range(1, 13):
        for h in range(24):
            assert g.at(m, h) == tally.get((m, h), 0)
    assert g.total == sum(tally.values())


def test_grid_is_read_only():
    g = TemporalGrid.zeros()
    with pytest.raises(ValueError):
        g.counts[0, 0] = 5
    with pytest.raises(ValueError):
        TemporalGrid(np.zeros((12, 23)))
    with pytest.raises(ValueError):
        TemporalGrid(-np.ones((12, 24)))


def test_week_series_rows():
    recs = [make_record(i, day_of_week=d, hour=i) for i, d in enumerate(DAYS)] + [make_record(9, hour=None)]
    s = week_hour_series(recs)
    assert s.shape == (7, 24) and s.sum() == 7
    assert all(s[i, i] == 1 for i in range(7))


# -- week split ----------------------------------------------------------

def split_oracle(series):
    """Exhaustive search in exact rational arithmetic; ties to the smallest hour."""
    s = [[Fraction(int(v)) for v in row] for row in series]
    xd = [sum(s[d][h] for d in range(4)) / 4 for h in range(24)]
    xe = s[5]

    def best(day, first, second):
        costs = [sum((day[h] - first[h]) ** 2 for h in range(c + 1))
                 + sum((day[h] - second[h]) ** 2 for h in range(c + 1, 24)) for c in range(24)]
        m = min(costs)
        return costs.index(m), costs

    p, cfr = best(s[4], xd, xe)
    q, csu = best(s[6], xe, xd)
    return p, q, cfr, csu


def test_split_matches_oracle_random(rng):
    for _ in range(30):
        series = rng.integers(0, 50, size=(7, 24))
        p, q, cfr, csu = split_oracle(series)
        sp = optimize_week_split(series)
        assert (sp.p, sp.q) == (p, q)
        ss_fr, ss_su = split_objectives(series)
        assert np.allclose(ss_fr, [float(c) for c in cfr], rtol=1e-12, atol=1e-9)
        assert np.allclose(ss_su, [float(c) for c in csu], rtol=1e-12, atol=1e-9)


def test_split_ties_go_low():
    # all days identical: every cut has zero cost
    series = np.tile(np.arange(24), (7, 1))
    sp = optimize_week_split(series)
    assert (sp.p, sp.q) == (0, 0)
    assert optimize_week_split(np.zeros((7, 24))) == WeekSplit(0, 0, 0.0, 0.0)


def test_friday_equal_to_weekday_centroid(rng):
    series = rng.integers(1, 30, size=(7, 24)).astype(float)
    series[0:4] = rng.integers(1, 30, size=24)  # Mo..Th identical, so x^D is that row
    series[4] = series[0]
    series[5] = series[0] + 7  # keep x^E away from x^D
    assert optimize_week_split(series).p == 23


def test_reference_split_day_classes():
    assert day_class("Fr", 12, REFERENCE_SPLIT) is DayClass.WEEKEND
    assert day_class("Fr", 11, REFERENCE_SPLIT) is DayClass.WEEKDAY
    assert day_class("Su", 8, REFERENCE_SPLIT) is DayClass.WEEKEND
    assert day_class("Su", 9, REFERENCE_SPLIT) is DayClass.WEEKDAY
    assert day_class("Sa", 23, REFERENCE_SPLIT) is DayClass.WEEKEND
    for h in range(24):
        assert day_class("We", h, REFERENCE_SPLIT) is DayClass.WEEKDAY
    with pytest.raises(ValueError):
        day_class("Xx", 0, REFERENCE_SPLIT)
    with pytest.raises(ValueError):
        WeekSplit(24, 0)
    # 4 full days + Friday 0-11 + Sunday 9-23
    n_weekday = sum(day_class(d, h, REFERENCE_SPLIT) is DayClass.WEEKDAY for d in DAYS for h in range(24))
    assert n_weekday == 4 * 24 + 12 + 15


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, (7, 24), elements=st.integers(0, 30)))
def test_split_optimum_is_minimal(series):
    sp = optimize_week_split(series)
    ss_fr, ss_su = split_objectives(series)
    assert ss_fr[sp.p] <= ss_fr.min() and ss_su[sp.q] <= ss_su.min()
    assert sp.p == int(np.flatnonzero(ss_fr == ss_fr.min())[0])


# -- Moran's I -----------------------------------------------------------

def moran_oracle(grid):
    """Direct double sum over cell pairs with queen adjacency."""
    y = np.asarray(grid, dtype=float)
    rows, cols = y.shape
    cells = [(i, j) for i in range(rows) for j in range(cols)]
    mean = y.mean()
    num = 0.0
    w = 0
    for (a, b) in cells:
        for (c, d) in cells:
            if (a, b) != (c, d) and abs(a - c) <= 1 and abs(b - d) <= 1:
                w += 1
                num += (y[a, b] - mean) * (y[c, d] - mean)
    den = ((y - mean) ** 2).sum()
    return len(cells) / w * num / den


def test_moran_2x2():
    g = [[1, 0], [0, 1]]
    assert morans_i(g) == -1 / 3
    assert morans_i(g, queen_weights((2, 2))) == -1 / 3
    assert Fraction(4, 12) * Fraction(-1, 1) == Fraction(-1, 3)  # N/W * num/den by hand


def test_moran_constant_grid():
    with pytest.raises(UndefinedStatistic):
        morans_i(np.full((12, 24), 3))
    with pytest.raises(UndefinedStatistic):
        morans_i(TemporalGrid.zeros(), queen_weights())


def test_queen_weights_structure():
    w = queen_weights()
    m = w.matrix
    assert np.array_equal(m, m.T) and not np.diag(m).any()
    deg = w.degrees()
    assert deg[0, 0] == deg[0, 23] == deg[11, 0] == deg[11, 23] == 3
    assert deg[0, 5] == deg[5, 0] == deg[11, 7] == deg[4, 23] == 5
    assert (deg[1:-1, 1:-1] == 8).all()
    # enumerate adjacent pairs directly
    pairs = 0
    for i, j, k, l in itertools.product(range(12), range(24), range(12), range(24)):
        if (i, j) < (k, l) and abs(i - k) <= 1 and abs(j - l) <= 1:
            pairs += 1
    assert 2 * pairs == 2 * (12 * 23 + 11 * 24 + 2 * 11 * 23) == 2092 == w.W == deg.sum()
    # no wraparound: December/January and 23h/0h are not neighbors
    assert m[0, 11 * 24] == 0 and m[0, 23] == 0


def test_moran_matches_oracle(rng):
    for shape in ((12, 24), (3, 5), (12, 24)):
        g = rng.poisson(4.0, size=shape)
        ref = moran_oracle(g)
        assert morans_i(g) == pytest.approx(ref, abs=1e-12)
        assert morans_i(g, queen_weights(shape)) == pytest.approx(ref, abs=1e-12)


def test_moran_smooth_vs_stripes():
    m, h = np.meshgrid(np.arange(12), np.arange(24), indexing="ij")
    smooth = np.exp(-((m - 6) ** 2) / 8 - ((h - 12) ** 2) / 30) * 100
    stripes = h % 2  # under queen contiguity 6 of 8 neighbors differ
    assert morans_i(smooth) > 0.8
    assert morans_i(stripes) < -0.4


nonconst_grid = arrays(np.int64, (12, 24), elements=st.integers(0, 50)).filter(lambda a: a.min() != a.max())


@settings(max_examples=40, deadline=None)
@given(nonconst_grid, st.integers(-20, 20), st.floats(0.1, 50))
def test_moran_shift_and_scale_invariance(g, c, s):
    base = morans_i(g)
    assert morans_i(g + c) == pytest.approx(base, abs=1e-9)
    assert morans_i(g * s) == pytest.approx(base, abs=1e-9)


# -- Pearson's r ---------------------------------------------------------

def pearson_oracle(a, b):
    a = [float(v) for v in np.ravel(a)]
    b = [float(v) for v in np.ravel(b)]
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def test_pearson_matches_oracle(rng):
    for _ in range(20):
        a, b = rng.random(288), rng.random(288)
        assert abs(pearson_r(a.reshape(12, 24), b.reshape(12, 24)) - pearson_oracle(a, b)) < 1e-12


def test_pearson_self_and_constant(rng):
    a = rng.integers(0, 9, size=(12, 24))
    a[0, 0] = 10
    assert pearson_r(a, a) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(UndefinedStatistic):
        pearson_r(a, np.ones((12, 24)))
    with pytest.raises(ValueError):
        pearson_r(a, np.ones((12, 23)))


@settings(max_examples=40, deadline=None)
@given(nonconst_grid, nonconst_grid, st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_symmetry_and_affine(a, b, s, c):
    r = pearson_r(a, b)
    assert r == pytest.approx(pearson_r(b, a), abs=1e-12)
    assert r == pytest.approx(pearson_r(a * s + c, b), abs=1e-9)
    assert -1.0 <= r <= 1.0
