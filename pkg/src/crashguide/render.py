"""SVG month-hour charts: rule dot grids and count heatmaps.

Output is plain SVG text built by hand so it is byte-stable across runs.
Rows are months (January at the top), columns are hours 0-23.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .mining import AttentionRule
from .tempstats import TemporalGrid

__all__ = ["render_rule_grid", "render_heatmap", "heatmap_color", "confidence_color", "lift_radius"]

MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
CELL = 22
LEFT, TOP = 48, 44
GRID_W, GRID_H = 24 * CELL, 12 * CELL

_WHITE = (255, 255, 255)
_RED = (215, 48, 39)
_GREEN = (26, 152, 80)
_CONF_LO = (254, 224, 210)
_CONF_HI = (103, 0, 13)
R_MIN, R_MAX = 2.5, CELL / 2 - 1


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _mix(a, b, t: float):
    return tuple(x + (y - x) * t for x, y in zip(a, b))


def heatmap_color(value: float, mean: float, scale: float) -> str:
    """Diverging color: green below the mean, white at it, red above.
    ``scale`` is the largest absolute deviation on the grid."""
    if scale <= 0:
        return _hex(_WHITE)
    t = max(-1.0, min(1.0, (value - mean) / scale))
    return _hex(_mix(_WHITE, _RED, t) if t >= 0 else _mix(_WHITE, _GREEN, -t))


def confidence_color(conf: float) -> str:
    return _hex(_mix(_CONF_LO, _CONF_HI, max(0.0, min(1.0, conf))))


def lift_radius(lift: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return (R_MIN + R_MAX) / 2
    return R_MIN + (R_MAX - R_MIN) * (lift - lo) / (hi - lo)


def _f(x: float) -> str:
    return f"{x:.2f}"


def _frame(width: int, height: int, title: str) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<rect class="chrome" x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text class="chrome" x="{LEFT}" y="18" font-size="13">{escape(title)}</text>',
    ]
    for i, m in enumerate(MONTHS):
        y = TOP + i * CELL + CELL / 2 + 3
        out.append(f'<text class="chrome" x="{LEFT - 6}" y="{_f(y)}" text-anchor="end">{m}</text>')
    for j in range(24):
        x = LEFT + j * CELL + CELL / 2
        out.append(f'<text class="chrome" x="{_f(x)}" y="{TOP - 6}" text-anchor="middle">{j}</text>')
    return out


def render_rule_grid(rules: Sequence[AttentionRule], title: str = "", type_code: int | None = None) -> str:
    """Dot grid of rules: position = (month, hour), fill = confidence,
    radius = lift scaled linearly between the smallest and largest lift shown."""
    if type_code is not None:
        rules = [r for r in rules if r.type == type_code]
    rules = sorted(rules, key=lambda r: (r.month, r.hour, r.kind, r.type))
    lifts = [r.lift for r in rules]
    lo, hi = (min(lifts), max(lifts)) if lifts else (1.0, 1.0)
    legend_x = LEFT + GRID_W + 24
    width, height = legend_x + 150, TOP + GRID_H + 30
    out = _frame(width, height, title)
    for i in range(13):
        y = TOP + i * CELL
        out.append(f'<line class="chrome" x1="{LEFT}" y1="{y}" x2="{LEFT + GRID_W}" y2="{y}" stroke="#dddddd"/>')
    for j in range(25):
        x = LEFT + j * CELL
        out.append(f'<line class="chrome" x1="{x}" y1="{TOP}" x2="{x}" y2="{TOP + GRID_H}" stroke="#dddddd"/>')
    for r in rules:
        cx = LEFT + r.hour * CELL + CELL / 2
        cy = TOP + (r.month - 1) * CELL + CELL / 2
        out.append(
            f'<circle class="rule-dot" cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(lift_radius(r.lift, lo, hi))}" '
            f'fill="{confidence_color(r.confidence)}"><title>{MONTHS[r.month - 1]} {r.hour}:00 '
            f'C={r.confidence:.4f} L={r.lift:.4f}</title></circle>'
        )
    # legend: confidence ramp and the two extreme dot sizes
    out.append(f'<text class="chrome" x="{legend_x}" y="{TOP}">confidence</text>')
    for s in range(5):
        c = s / 4
        out.append(f'<rect class="chrome" x="{legend_x + s * 20}" y="{TOP + 6}" width="20" height="10" '
                   f'fill="{confidence_color(c)}"/>')
    out.append(f'<text class="chrome" x="{legend_x}" y="{TOP + 28}">0</text>')
    out.append(f'<text class="chrome" x="{legend_x + 100}" y="{TOP + 28}" text-anchor="end">1</text>')
    out.append(f'<text class="chrome" x="{legend_x}" y="{TOP + 52}">lift</text>')
    for lift, dy in ((lo, 66), (hi, 90)):
        out.append(f'<circle class="chrome" cx="{legend_x + 10}" cy="{TOP + dy}" '
                   f'r="{_f(lift_radius(lift, lo, hi))}" fill="#888888"/>')
        out.append(f'<text class="chrome" x="{legend_x + 26}" y="{TOP + dy + 4}">{lift:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_heatmap(grid: TemporalGrid | np.ndarray, title: str = "") -> str:
    """12x24 heatmap, diverging color centered on the grid mean."""
    counts = grid.counts if isinstance(grid, TemporalGrid) else np.asarray(grid)
    vals = counts.astype(float)
    mean = float(vals.mean())
    scale = float(np.abs(vals - mean).max())
    width, height = LEFT + GRID_W + 20, TOP + GRID_H + 30
    out = _frame(width, height, title)
    for i in range(12):
        for j in range(24):
            v = counts[i, j]
            out.append(
                f'<rect class="cell" x="{LEFT + j * CELL}" y="{TOP + i * CELL}" width="{CELL}" height="{CELL}" '
                f'fill="{heatmap_color(float(v), mean, scale)}"><title>{MONTHS[i]} {j}:00 n={v}</title></rect>'
            )
    out.append(f'<text class="chrome" x="{LEFT}" y="{TOP + GRID_H + 20}">mean {mean:.2f} per spot</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
