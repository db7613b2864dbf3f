"""
Attention on a detected driving scene
=====================================

Distances come from box heights, a pedestrian is risky when it overlaps
the direct lane within 10 ft, and guidance rules decide which detected
objects deserve attention.
"""

import json
from importlib import resources

from crashguide.guidance import GuidanceResponse
from crashguide.scene import apply_attention, estimate_distance, load_frame

data = resources.files("crashguide").joinpath("data")
frame = load_frame(data.joinpath("scene_frame.json"))
guidance = GuidanceResponse.from_json(json.loads(data.joinpath("scene_guidance.json").read_text()))

print("rules in force:")
for r in guidance.rules:
    print(f"  {r.kind} {r.type}: confidence {r.confidence}, lift {r.lift}")

print("\ndetections:")
for i, obj in enumerate(frame.objects):
    d = estimate_distance(obj)
    print(f"  #{i} {obj.cls:10s} {obj.direction:9s} {obj.area:16s}", f"{d:.1f} ft" if d is not None else "")

scene = apply_attention(frame, guidance)
print("\nattended:", scene.attended)
for a in scene.objects:
    print(f"  #{a.index} {'*' if a.attended else ' '} {a.rationale[0]}")
for n in scene.notifications:
    print("notify:", n)
