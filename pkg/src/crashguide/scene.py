"""Apply attention guidance to one frame of detector/segmenter output.

No model inference happens here.  A frame is a JSON document listing the
detected objects (class, pixel box, travel direction, area tag) and the
direct-lane polygon from the segmenter.  Distances follow the pinhole model
``distance = focal_length * pixel_scale * true_height / box_height``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from .codes import CodeTables, default_code_tables
from .guidance import GuidanceResponse
from .mining import FHE, MC

__all__ = [
    "SceneError",
    "Box",
    "DetectedObject",
    "SceneFrame",
    "Calibration",
    "PedestrianFlag",
    "ObjectAnnotation",
    "AnnotatedScene",
    "RULE_TARGETS",
    "estimate_distance",
    "lane_bounding_rectangle",
    "flag_risky_pedestrians",
    "apply_attention",
    "load_frame",
]

CLASSES = ("pedestrian", "car", "suv", "van", "other")
VEHICLES = ("car", "suv", "van")
DIRECTIONS = ("same", "opposite", "crossing", "stationary", "unknown")
AREAS = ("direct lane", "alternative lane", "roadside", "off-trafficway", "unknown")


class SceneError(ValueError):
    pass


class Box(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def bottom_center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, self.y1)

    def overlaps(self, other: "Box") -> bool:
        """Intersection with positive area; touching edges do not count."""
        return (min(self.x1, other.x1) > max(self.x0, other.x0)
                and min(self.y1, other.y1) > max(self.y0, other.y0))

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class DetectedObject:
    cls: str
    box: Box
    direction: str = "unknown"
    area: str = "unknown"

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise SceneError(f"unknown object class {self.cls!r}")
        if self.direction not in DIRECTIONS:
            raise SceneError(f"unknown direction {self.direction!r}")
        if self.area not in AREAS:
            raise SceneError(f"unknown area {self.area!r}")

    @property
    def is_vehicle(self) -> bool:
        return self.cls in VEHICLES


@dataclass(frozen=True)
class SceneFrame:
    width: int
    height: int
    objects: tuple[DetectedObject, ...]
    lane: tuple[tuple[float, float], ...] = ()
    timestamp: str | None = None
    location: Mapping | None = None
    flags: Mapping | None = None

    def __post_init__(self):
        for i, o in enumerate(self.objects):
            b = o.box
            if not (0 <= b.x0 < b.x1 <= self.width and 0 <= b.y0 < b.y1 <= self.height):
                raise SceneError(f"object {i}: box {tuple(b)} outside {self.width}x{self.height} image")

    @classmethod
    def from_json(cls, obj: Mapping) -> "SceneFrame":
        try:
            w, h = obj["image"]["width"], obj["image"]["height"]
            objs = tuple(
                DetectedObject(o["class"].lower(), Box(*map(float, o["box"])),
                               o.get("direction", "unknown"), o.get("area", "unknown"))
                for o in obj.get("objects", [])
            )
            lane = tuple((float(x), float(y)) for x, y in obj.get("direct_lane", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed frame: {exc}") from exc
        return cls(int(w), int(h), objs, lane, obj.get("timestamp"), obj.get("location"), obj.get("flags"))


def load_frame(path: str | Path) -> SceneFrame:
    with open(path, encoding="utf-8") as fh:
        return SceneFrame.from_json(json.load(fh))


def _default_heights() -> dict[str, float]:
    # pedestrian height is an assumption; vehicle heights are the usual references
    return {"van": 7.0, "suv": 6.0, "car": 4.7, "pedestrian": 5.6}


def _default_roi() -> frozenset[tuple[int, int]]:
    # bottom-center cells of a 4x4 grid: the ego vehicle's travel path
    return frozenset({(2, 1), (2, 2), (3, 1), (3, 2)})


@dataclass(frozen=True)
class Calibration:
    focal_length_in: float = 2.5
    pixel_scale: float = 100.0  # pixels per inch on the sensor
    heights_ft: Mapping[str, float] = field(default_factory=_default_heights)
    risk_distance_ft: float = 10.0
    roi_grid: int = 4
    roi_cells: frozenset = field(default_factory=_default_roi)

    def __post_init__(self):
        if self.focal_length_in <= 0 or self.pixel_scale <= 0 or self.risk_distance_ft <= 0:
            raise ValueError("calibration constants must be positive")
        if any(h <= 0 for h in self.heights_ft.values()):
            raise ValueError("object heights must be positive")

    @classmethod
    def from_config(cls, cfg: Mapping) -> "Calibration":
        kw = dict(cfg)
        if "heights_ft" in kw:
            kw["heights_ft"] = {**_default_heights(), **{k.lower(): float(v) for k, v in kw["heights_ft"].items()}}
        if "roi_cells" in kw:
            kw["roi_cells"] = frozenset(tuple(c) for c in kw["roi_cells"])
        return cls(**kw)

    def in_roi(self, box: Box, width: int, height: int) -> bool:
        x, y = box.bottom_center
        col = min(int(x * self.roi_grid / width), self.roi_grid - 1)
        row = min(int(y * self.roi_grid / height), self.roi_grid - 1)
        return (row, col) in self.roi_cells


def estimate_distance(obj: DetectedObject, calib: Calibration = Calibration()) -> float | None:
    """Distance in feet, or None when the class has no reference height."""
    true_h = calib.heights_ft.get(obj.cls)
    if true_h is None:
        return None
    h = obj.box.height
    if h <= 0:
        raise SceneError("box height must be positive")
    return calib.focal_length_in * calib.pixel_scale * true_h / h


def _polygon_area(poly: Sequence[tuple[float, float]]) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(poly, list(poly[1:]) + [poly[0]]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def lane_bounding_rectangle(polygon: Sequence[tuple[float, float]]) -> Box:
    if len(polygon) < 3:
        raise SceneError("lane polygon needs at least three vertices")
    if _polygon_area(polygon) == 0.0:
        raise SceneError("lane polygon is degenerate (zero area)")
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    return Box(min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class PedestrianFlag:
    index: int
    overlaps_lane: bool
    distance_ft: float | None
    within_threshold: bool

    @property
    def risky(self) -> bool:
        return self.overlaps_lane and self.within_threshold


def flag_risky_pedestrians(frame: SceneFrame, calib: Calibration = Calibration()) -> list[PedestrianFlag]:
    """A pedestrian is risky when its box overlaps the direct-lane rectangle
    and it is closer than the risk distance."""
    lane = lane_bounding_rectangle(frame.lane)
    flags = []
    for i, o in enumerate(frame.objects):
        if o.cls != "pedestrian":
            continue
        d = estimate_distance(o, calib)
        flags.append(PedestrianFlag(i, o.box.overlaps(lane), d, d is not None and d < calib.risk_distance_ft))
    return flags


# rule (kind, type code) -> object target; pedestrian code filled from tables
RULE_TARGETS: dict[tuple[str, int], str] = {
    (MC, 1): "same_direction_ahead",   # Front-to-Rear
    (MC, 7): "same_direction_ahead",   # Sideswipe, same direction
    (MC, 6): "crossing_vehicle",       # Angle
    (MC, 2): "opposite_ahead",         # Front-to-Front
}


def _targets(tables: CodeTables, extra: Mapping | None) -> dict[tuple[str, int], str]:
    t = {(FHE, tables.pedestrian_code): "risky_pedestrian", **RULE_TARGETS}
    if extra:
        t.update(extra)
    return t


@dataclass(frozen=True)
class ObjectAnnotation:
    index: int
    cls: str
    box: Box
    direction: str
    area: str
    distance_ft: float | None
    in_roi: bool
    lane_overlap: bool | None
    risky: bool | None
    attended: bool
    rationale: tuple[str, ...]

    def to_json(self) -> dict:
        return {"index": self.index, "class": self.cls, "box": list(self.box), "direction": self.direction,
                "area": self.area, "distance_ft": self.distance_ft, "in_roi": self.in_roi,
                "lane_overlap": self.lane_overlap, "risky": self.risky, "attended": self.attended,
                "rationale": list(self.rationale)}


@dataclass(frozen=True)
class AnnotatedScene:
    objects: tuple[ObjectAnnotation, ...]
    notifications: tuple[str, ...]
    guidance: GuidanceResponse

    @property
    def attended(self) -> list[int]:
        return [a.index for a in self.objects if a.attended]

    def to_json(self, tables: CodeTables | None = None) -> dict:
        return {"guidance": self.guidance.to_json(tables), "objects": [a.to_json() for a in self.objects],
                "notifications": list(self.notifications)}


def _matches(target: str, o: DetectedObject, in_roi: bool, risky: bool | None) -> bool:
    if target == "risky_pedestrian":
        return o.cls == "pedestrian" and bool(risky)
    if not o.is_vehicle or not in_roi or o.area in ("off-trafficway", "roadside"):
        return False
    if target == "same_direction_ahead":
        return o.direction == "same"
    if target == "crossing_vehicle":
        return o.direction == "crossing"
    if target == "opposite_ahead":
        return o.direction == "opposite"
    return False


def _why_not(o: DetectedObject, in_roi: bool, risky: bool | None, flag: PedestrianFlag | None) -> str:
    if o.area == "off-trafficway":
        return "outside the trafficway"
    if o.cls == "pedestrian":
        if flag is not None and not flag.overlaps_lane:
            return "pedestrian not on the direct lane"
        if flag is not None and not flag.within_threshold:
            return "pedestrian beyond the risk distance"
        return "no pedestrian rule applies"
    if not o.is_vehicle:
        return "object class has no rule mapping"
    if not in_roi:
        return "outside the region of interest (far or off-path)"
    if o.area == "roadside":
        return "on the roadside"
    return f"{o.direction}-direction vehicle matches no retained collision rule"


def apply_attention(frame: SceneFrame, guidance: GuidanceResponse, calib: Calibration = Calibration(),
                    tables: CodeTables | None = None, targets: Mapping | None = None) -> AnnotatedScene:
    """Label every detected object as attended or de-emphasized, with reasons."""
    tables = tables or default_code_tables()
    table = _targets(tables, targets)
    ped_flags = {f.index: f for f in flag_risky_pedestrians(frame, calib)} if frame.lane else {}
    active = [(r, table[(r.kind, r.type)]) for r in guidance.rules if (r.kind, r.type) in table]
    notes = []
    out = []
    for i, o in enumerate(frame.objects):
        flag = ped_flags.get(i)
        risky = flag.risky if flag is not None else None
        dist = estimate_distance(o, calib)
        in_roi = calib.in_roi(o.box, frame.width, frame.height)
        reasons = []
        for rule, target in active:
            if _matches(target, o, in_roi, risky):
                label = tables.label("fhe" if rule.kind == FHE else "mc", rule.type)
                reasons.append(f"{rule.kind} rule '{label}' (lift {rule.lift:.4f}) -> {target.replace('_', ' ')}")
        attended = bool(reasons)
        if not guidance.rules:
            reasons = ["no rule: nothing needs special attention"]
        elif not attended:
            reasons = [_why_not(o, in_roi, risky, flag)]
        if risky:
            notes.append(f"risky pedestrian #{i} at {dist:.1f} ft")
        out.append(ObjectAnnotation(i, o.cls, o.box, o.direction, o.area, dist, in_roi,
                                    flag.overlaps_lane if flag else None, risky, attended, tuple(reasons)))
    return AnnotatedScene(tuple(out), tuple(notes), guidance)
