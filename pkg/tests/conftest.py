import csv
import io
import random

import numpy as np
import pytest

from crashguide.ingest import DAYS, CrashRecord, derive_jun_int
from crashguide.synth import HEADER


def make_record(i=0, **kw):
    base = dict(case_id=f"r{i}", year=2015, month=1, day_of_week="We", hour=12, func_sys=3, rel_road=1,
                reljct2=1, typ_int=1, jun_int="1", light_cond=1, weather=1, sch_bus=False, work_zone=False,
                within_interchange=False, crash_factor=False, bad_weather=False, fhe=12, mc=1)
    base.update(kw)
    if "jun_int" not in kw and ("reljct2" in kw or "typ_int" in kw):
        base["jun_int"] = derive_jun_int(base["reljct2"], base["typ_int"])
    if base["fhe"] != 12 and "mc" not in kw:
        base["mc"] = None
    return CrashRecord(**base)


def random_records(n, seed=0, keys=((3, 1, 1, 1), (4, 1, 1, 1), (7, 1, 2, 2), (1, 4, 1, 1)),
                   fhe_codes=(12, 8, 1, 42, 9), mc_codes=(1, 2, 6, 7), unknown_hour=0.0):
    """Records with uniformly random times, keys and types."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        f, rr, rj2, ti = rng.choice(keys)
        fhe = rng.choice(fhe_codes)
        hour = None if rng.random() < unknown_hour else rng.randrange(24)
        out.append(make_record(i, month=rng.randint(1, 12), hour=hour, day_of_week=rng.choice(DAYS),
                               func_sys=f, rel_road=rr, reljct2=rj2, typ_int=ti, fhe=fhe,
                               mc=rng.choice(mc_codes) if fhe == 12 else None))
    return out


def csv_text(rows, header=HEADER):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def raw_row(i=0, **kw):
    row = {"ST_CASE": 10000 + i, "YEAR": 2015, "MONTH": 3, "DAY_WEEK": 4, "HOUR": 6, "FUNC_SYS": 7,
           "REL_ROAD": 1, "RELJCT1": 0, "RELJCT2": 4, "TYP_INT": 1, "LGT_COND": 1, "WEATHER": 1,
           "WRK_ZONE": 0, "SCH_BUS": 0, "HARM_EV": 8, "MAN_COLL": 0, "CF1": 0, "CF2": 0, "CF3": 0}
    row.update(kw)
    return row


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or rep.skipped or rep.failed:
        status = "SKIP" if rep.skipped else "FAIL" if rep.failed else "PASS"
        detail = "; ".join(f"{k}: {v}" for k, v in rep.user_properties)
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2].removeprefix("Skipped: ")
        _CRITERIA[n] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {status:4s} {title}" + (f"  ({detail})" if detail else ""))
