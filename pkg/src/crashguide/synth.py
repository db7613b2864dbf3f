"""Synthetic FARS-coded accident rows with planted structure.

The generator plants two things a correct pipeline must find again:

* a set of spatial sites sharing one smooth month-hour pattern (a strongly
  autocorrelated temporal cluster), and
* one time spot in that cluster where a chosen crash type is over-represented
  by a target lift.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

HEADER = ["ST_CASE", "YEAR", "MONTH", "DAY_WEEK", "HOUR", "FUNC_SYS", "REL_ROAD", "RELJCT1", "RELJCT2",
          "TYP_INT", "LGT_COND", "WEATHER", "WRK_ZONE", "SCH_BUS", "HARM_EV", "MAN_COLL", "CF1", "CF2", "CF3"]

# (FUNC_SYS, REL_ROAD, RELJCT2, TYP_INT)
PLANTED_SITES = ((3, 1, 1, 1), (4, 1, 1, 1), (5, 1, 1, 1), (7, 1, 2, 2))
MORNING_SITES = ((1, 1, 1, 1), (2, 1, 1, 1), (1, 4, 1, 1))
NOISE_SITES = ((3, 4, 1, 1), (4, 4, 1, 1), (5, 4, 1, 1), (6, 1, 1, 1), (6, 4, 1, 1),
               (7, 4, 1, 1), (3, 1, 2, 3), (4, 1, 2, 3), (7, 1, 4, 1), (5, 5, 1, 1))
RARE_SITES = ((2, 3, 20, 1), (1, 3, 5, 1), (6, 5, 8, 1), (7, 7, 1, 1))

FHE_BASE = {12: 0.45, 8: 0.20, 1: 0.10, 42: 0.12, 9: 0.05, 30: 0.04, 34: 0.04}
MC_BASE = {1: 0.30, 2: 0.20, 6: 0.35, 7: 0.10, 8: 0.05}


def _bump(month_c: float, hour_c: float, sm: float, sh: float, floor: float = 0.05) -> np.ndarray:
    m = np.arange(12)[:, None]
    h = np.arange(24)[None, :]
    p = np.exp(-0.5 * (((m - month_c) / sm) ** 2 + ((h - hour_c) / sh) ** 2)) + floor
    return p / p.sum()


@dataclass(frozen=True)
class PlantedTruth:
    sites: tuple[tuple[int, int, int, int], ...]
    spot: tuple[int, int]  # (month 1..12, hour)
    fhe_type: int
    lift: float
    base_rate: float


@dataclass
class SyntheticData:
    rows: list[dict]
    truth: PlantedTruth
    meta: dict = field(default_factory=dict)


def generate(n: int = 10_000, seed: int = 0, spot: tuple[int, int] = (10, 20), fhe_type: int = 8,
             lift: float = 2.0, base_rate: float = 0.2, spot_share: float = 0.04,
             sparse_rates: Sequence[float] = (0.003, 0.02, 0.04, 0.06, 0.08)) -> SyntheticData:
    """Generate ``n`` rows.

    Planted sites take 65% of crashes; within them ``spot`` carries
    ``spot_share`` of the cluster's crashes and crash type ``fhe_type``
    occurs there with probability ``lift * base_rate`` against an overall
    rate of ``base_rate``.
    """
    rng = np.random.default_rng(seed)
    planted = _bump(spot[0] - 1, spot[1], 2.5, 3.0)
    idx = (spot[0] - 1, spot[1])
    rest = planted.copy()
    rest[idx] = 0.0
    planted = rest * (1.0 - spot_share) / rest.sum()
    planted[idx] = spot_share
    morning = _bump(2, 7, 2.0, 2.0)
    flat = np.full((12, 24), 1.0 / 288)

    sites = list(PLANTED_SITES) + list(MORNING_SITES) + list(NOISE_SITES) + list(RARE_SITES)
    weights = ([0.65 / len(PLANTED_SITES)] * len(PLANTED_SITES)
               + [0.20 / len(MORNING_SITES)] * len(MORNING_SITES)
               + [0.145 / len(NOISE_SITES)] * len(NOISE_SITES)
               + [0.005 / len(RARE_SITES)] * len(RARE_SITES))
    patterns = [planted] * len(PLANTED_SITES) + [morning] * len(MORNING_SITES) + [flat] * (
        len(NOISE_SITES) + len(RARE_SITES))

    site_idx = rng.choice(len(sites), size=n, p=np.asarray(weights) / sum(weights))
    spots = np.empty(n, dtype=np.int64)
    for s in range(len(sites)):
        sel = np.flatnonzero(site_idx == s)
        spots[sel] = rng.choice(288, size=len(sel), p=patterns[s].ravel())
    months = spots // 24 + 1
    hours = spots % 24
    hours = np.where(rng.random(n) < 0.005, 99, hours)
    days = rng.integers(1, 8, size=n)

    fhe_codes = np.array(list(FHE_BASE))
    fhe_p = np.array(list(FHE_BASE.values()))
    fhe_p = fhe_p / fhe_p.sum()
    # inside the planted cluster, fhe_type is base_rate overall and lift*base_rate at the spot
    hot_rate = lift * base_rate
    cold_rate = base_rate * (1 - lift * spot_share) / (1 - spot_share)
    others = fhe_p.copy()
    others[fhe_codes == fhe_type] = 0.0
    others = others / others.sum()
    in_planted = site_idx < len(PLANTED_SITES)
    at_spot = in_planted & (spots == idx[0] * 24 + idx[1]) & (hours != 99)
    fhe = rng.choice(fhe_codes, size=n, p=fhe_p)
    u = rng.random(n)
    target_p = np.where(at_spot, hot_rate, cold_rate)
    planted_fhe = np.where(u < target_p, fhe_type, rng.choice(fhe_codes, size=n, p=others))
    fhe = np.where(in_planted, planted_fhe, fhe)

    mc_codes = np.array(list(MC_BASE))
    mc_p = np.array(list(MC_BASE.values()))
    mc = np.where(fhe == 12, rng.choice(mc_codes, size=n, p=mc_p / mc_p.sum()), 0)

    r = rng.random((n, 5))
    rates = np.asarray(sparse_rates)
    sch, wz, inter, cf, badw = (r < rates).T
    weather = np.where(badw, rng.choice([2, 4, 5], size=n), rng.choice([1, 10], size=n))

    rows = []
    for i in range(n):
        f, rr, rj2, ti = sites[site_idx[i]]
        h = int(hours[i])
        rows.append({
            "ST_CASE": 100000 + i,
            "YEAR": 2015,
            "MONTH": int(months[i]),
            "DAY_WEEK": int(days[i]),
            "HOUR": h,
            "FUNC_SYS": f,
            "REL_ROAD": rr,
            "RELJCT1": int(inter[i]),
            "RELJCT2": rj2,
            "TYP_INT": ti,
            "LGT_COND": 1 if h != 99 and 7 <= h <= 18 else 2,
            "WEATHER": int(weather[i]),
            "WRK_ZONE": 1 if wz[i] else 0,
            "SCH_BUS": int(sch[i]),
            "HARM_EV": int(fhe[i]),
            "MAN_COLL": int(mc[i]),
            "CF1": 14 if cf[i] else 0,
            "CF2": 0,
            "CF3": 0,
        })
    truth = PlantedTruth(PLANTED_SITES, spot, fhe_type, lift, base_rate)
    return SyntheticData(rows, truth, {"n": n, "seed": seed})


def write_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
