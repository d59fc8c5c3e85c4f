"""Segment a screenshot into groups, lines and columns and relocate by address.

Run:  python3 demos/03_layout_characterization.py
"""

from uireplay.config import EngineConfig
from uireplay.imaging import to_grayscale
from uireplay.layout import (
    TextRegion,
    assign_text,
    characterize_screen,
    locate_by_tuple,
    tuple_of_point,
)
from uireplay.geometry import PixelBox, RelPoint
from uireplay.script import OpKind
from uireplay.synthetic import ScreenSpec, WidgetSpec, render_screen

screen_spec = ScreenSpec(
    name="home",
    widgets=(
        WidgetSpec("header", 0.06, 0.03, 0.88, 0.08, texture_seed=1, label="Inbox"),
        WidgetSpec("card_a", 0.06, 0.18, 0.40, 0.15, texture_seed=2, label="OK"),
        WidgetSpec("card_b", 0.54, 0.18, 0.40, 0.15, texture_seed=3, label="Cancel"),
        WidgetSpec("row_0", 0.06, 0.42, 0.88, 0.10, texture_seed=4),
        WidgetSpec("row_1", 0.06, 0.56, 0.88, 0.10, texture_seed=5),
        WidgetSpec("input", 0.06, 0.78, 0.62, 0.10, op=OpKind.TEXT_INPUT, texture_seed=6),
        WidgetSpec("send", 0.72, 0.78, 0.22, 0.10, texture_seed=7),
    ),
)

img, rects, labels = render_screen(screen_spec, (540, 1080))
layout = characterize_screen(to_grayscale(img), EngineConfig())
regions = [TextRegion(PixelBox(l["x0"], l["y0"], l["x1"], l["y1"]), l["text"], 0.99)
           for l in labels]
layout = assign_text(layout, regions)

print("group/line/column addresses (edges -> dilation -> contours -> filters):")
for e in layout.entries:
    text = f" text={e.text!r}" if e.text else ""
    print(f"  ({e.group},{e.line},{e.column}) box=({e.box.x0:4d},{e.box.y0:4d})"
          f"-({e.box.x1:4d},{e.box.y1:4d}){text}")

print("\npoint -> widget (smallest containing box wins):")
for p in (RelPoint(0.25, 0.25), RelPoint(0.5, 0.5), RelPoint(0.83, 0.83)):
    entry = tuple_of_point(layout, p)
    print(f"  ({p.x:.2f},{p.y:.2f}) -> address {entry.address}")

print("\nrelocation by recorded address:")
hit = locate_by_tuple(layout, (1, 0, 1))
print(f"  exact (1,0,1)          -> box ({hit.box.x0},{hit.box.y0})..")
hit = locate_by_tuple(layout, (1, 7, 1))
print(f"  clamped (1,7,1)        -> box ({hit.box.x0},{hit.box.y0}).. (nearest line)")
hit = locate_by_tuple(layout, (1, 0, 0), recorded_text="Cancel")
print(f"  (1,0,0) + text 'Cancel' -> box ({hit.box.x0},{hit.box.y0}).. (text assist)")
