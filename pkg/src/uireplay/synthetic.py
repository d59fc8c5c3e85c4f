"""Deterministic synthetic app fixtures.

Renders small multi-screen apps to PNG at any resolution from one relative
geometry, so the same logical UI can be produced for a 1080x2244 recording
device and a 720x1544 replay device. Widgets get procedural textures (seeded
random blocks) that give the feature matcher something to grip, labels become
OCR sidecar annotations, and every widget doubles as a ground-truth region in
the session manifest.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .geometry import RelPoint
from .imaging import RasterImage, encode_png
from .script import OpKind

BACKGROUND = 228
BORDER_SHADE = 30
FACE_SHADE = 250


@dataclass(frozen=True)
class WidgetSpec:
    """One widget in relative units: position, size, behavior, appearance."""

    id: str
    x: float
    y: float
    w: float
    h: float
    op: OpKind = OpKind.TAP
    target: str | None = None  # None = stay on this screen
    label: str = ""
    texture_seed: int = 0


@dataclass(frozen=True)
class ScreenSpec:
    name: str
    widgets: tuple[WidgetSpec, ...]


@dataclass(frozen=True)
class AppSpec:
    name: str
    initial: str
    screens: tuple[ScreenSpec, ...]

    def screen(self, name: str) -> ScreenSpec:
        for s in self.screens:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass(frozen=True)
class WalkStep:
    """One scripted interaction for the headless recorder."""

    kind: OpKind
    widget_id: str | None = None
    payload: str = ""


def textured_patch(width: int, height: int, seed: int, bars: int = 12) -> np.ndarray:
    """A bordered BGR patch textured with bars anchored to the frame.

    Anchoring every bar to the border keeps the whole widget one connected
    contour at any rendering scale, so layout characterization sees exactly
    one box per widget while the bar corners still feed the feature matcher.
    The frame is capped at 4 px so its inner and outer edges always merge
    under the default 2 px dilation.
    """
    border = max(2, min(4, round(min(width, height) * 0.06)))
    patch = np.full((height, width, 3), BORDER_SHADE, dtype=np.uint8)
    patch[border : height - border, border : width - border] = FACE_SHADE
    inner_w = width - 2 * border
    inner_h = height - 2 * border
    rng = np.random.default_rng(seed)
    for _ in range(bars):
        side = int(rng.integers(0, 4))
        pos = rng.uniform(0.06, 0.82)
        thick = rng.uniform(0.05, 0.15)
        length = rng.uniform(0.22, 0.85)
        shade = rng.integers(0, 175, size=3)
        if side in (0, 1):  # vertical bar hanging from the top/bottom frame
            bx0 = border + int(pos * inner_w)
            bx1 = min(width - border, bx0 + max(2, int(thick * inner_w)))
            bh = max(3, int(length * inner_h))
            by0, by1 = (border, border + bh) if side == 0 else (height - border - bh, height - border)
        else:  # horizontal bar growing from the left/right frame
            by0 = border + int(pos * inner_h)
            by1 = min(height - border, by0 + max(2, int(thick * inner_h)))
            bw = max(3, int(length * inner_w))
            bx0, bx1 = (border, border + bw) if side == 2 else (width - border - bw, width - border)
        if bx1 > bx0 and by1 > by0:
            patch[by0:by1, bx0:bx1] = shade
    return patch


def _widget_rect(widget: WidgetSpec, resolution: tuple[int, int]) -> tuple[int, int, int, int]:
    """Half-open pixel rect [x0, x1) x [y0, y1) of the widget."""
    w, h = resolution
    x0 = round(widget.x * w)
    y0 = round(widget.y * h)
    x1 = round((widget.x + widget.w) * w)
    y1 = round((widget.y + widget.h) * h)
    return x0, y0, x1, y1


def render_screen(
    screen: ScreenSpec, resolution: tuple[int, int]
) -> tuple[RasterImage, list[tuple[WidgetSpec, tuple[int, int, int, int]]], list[dict]]:
    """Render one screen; also return widget pixel rects and label annotations."""
    w, h = resolution
    canvas = np.full((h, w, 3), BACKGROUND, dtype=np.uint8)
    rects = []
    labels = []
    for widget in screen.widgets:
        x0, y0, x1, y1 = _widget_rect(widget, resolution)
        canvas[y0:y1, x0:x1] = textured_patch(x1 - x0, y1 - y0, widget.texture_seed)
        rects.append((widget, (x0, y0, x1, y1)))
        if widget.label:
            scale = max(0.35, (y1 - y0) * 0.26 / 22.0)
            thickness = max(1, int(round(scale * 1.6)))
            (tw, th), baseline = cv2.getTextSize(
                widget.label, cv2.FONT_HERSHEY_SIMPLEX, scale, thickness
            )
            ox = x0 + max(3, (x1 - x0 - tw) // 2)
            oy = y0 + (y1 - y0 + th) // 2
            cv2.rectangle(canvas, (ox - 2, oy - th - 2), (ox + tw + 2, oy + baseline + 2),
                          (FACE_SHADE,) * 3, -1)
            cv2.putText(
                canvas, widget.label, (ox, oy), cv2.FONT_HERSHEY_SIMPLEX,
                scale, (10, 10, 10), thickness, cv2.LINE_AA,
            )
            labels.append(
                {
                    "text": widget.label,
                    "x0": ox - 2,
                    "y0": oy - th - 2,
                    "x1": min(w - 1, ox + tw + 2),
                    "y1": min(h - 1, oy + baseline + 2),
                }
            )
    rgba = np.dstack([canvas[:, :, ::-1], np.full((h, w), 255, dtype=np.uint8)])
    return RasterImage(rgba), rects, labels


def mutate_content(app: AppSpec, widget_ids: set[str], salt: int = 7_000_000) -> AppSpec:
    """New app spec whose named widgets render with different textures."""
    screens = []
    for s in app.screens:
        widgets = tuple(
            replace(wd, texture_seed=wd.texture_seed + salt) if wd.id in widget_ids else wd
            for wd in s.widgets
        )
        screens.append(ScreenSpec(name=s.name, widgets=widgets))
    return AppSpec(name=app.name, initial=app.initial, screens=tuple(screens))


def build_session(
    app: AppSpec,
    resolution: tuple[int, int],
    out_dir: str | Path,
    serial: str | None = None,
) -> Path:
    """Write PNGs, OCR sidecars and session.xml for one rendered device."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serial = serial or f"{app.name}-{resolution[0]}x{resolution[1]}"
    root = ET.Element("session", initial=app.initial, name=app.name, serial=serial)
    for screen in app.screens:
        img, rects, labels = render_screen(screen, resolution)
        png_name = f"{screen.name}.png"
        (out / png_name).write_bytes(encode_png(img))
        attrs = {
            "name": screen.name,
            "png": png_name,
            "w": str(resolution[0]),
            "h": str(resolution[1]),
        }
        if labels:
            ocr_name = f"{screen.name}.ocr.xml"
            ocr_root = ET.Element("ocr")
            for lab in labels:
                region = ET.SubElement(
                    ocr_root,
                    "region",
                    x0=str(max(0, lab["x0"])),
                    y0=str(max(0, lab["y0"])),
                    x1=str(lab["x1"]),
                    y1=str(lab["y1"]),
                    conf="0.99",
                )
                region.text = lab["text"]
            (out / ocr_name).write_bytes(ET.tostring(ocr_root, encoding="utf-8"))
            attrs["ocr"] = ocr_name
        screen_el = ET.SubElement(root, "screen", attrs)
        for widget, (x0, y0, x1, y1) in rects:
            ET.SubElement(
                screen_el,
                "region",
                x0=str(x0),
                y0=str(y0),
                x1=str(x1 - 1),
                y1=str(y1 - 1),
                op=widget.op.value,
                target=widget.target or screen.name,
                id=widget.id,
            )
    (out / "session.xml").write_bytes(ET.tostring(root, encoding="utf-8"))
    return out


def widget_center(app: AppSpec, screen_name: str, widget_id: str) -> RelPoint:
    for widget in app.screen(screen_name).widgets:
        if widget.id == widget_id:
            return RelPoint(widget.x + widget.w / 2.0, widget.y + widget.h / 2.0)
    raise KeyError(f"{widget_id} not on {screen_name}")


def events_for_walk(app: AppSpec, walk: list[WalkStep]) -> list[dict]:
    """Scripted recorder events (relative coordinates) for a widget walk.

    Tracks the screen the app would be showing, assuming every interaction
    hits its widget.
    """
    events = []
    current = app.initial
    trail = [current]
    for step in walk:
        if step.kind is OpKind.BACK:
            events.append({"kind": "back"})
            trail.pop()
            current = trail[-1]
            continue
        widget = next(
            w for w in app.screen(current).widgets if w.id == step.widget_id
        )
        center = RelPoint(widget.x + widget.w / 2.0, widget.y + widget.h / 2.0)
        ev = {"kind": step.kind.value, "x": center.x, "y": center.y}
        if step.kind is OpKind.SWIPE:
            ev["x2"] = center.x
            ev["y2"] = max(0.02, center.y - widget.h * 1.5)
        if step.kind is OpKind.TEXT_INPUT:
            ev["text"] = step.payload
        events.append(ev)
        target = widget.target or current
        if target != current:
            trail.append(target)
        current = target
    return events


def events_to_xml(events: list[dict]) -> bytes:
    root = ET.Element("events")
    for ev in events:
        ET.SubElement(root, "event", {k: str(v) for k, v in ev.items()})
    return ET.tostring(root, encoding="utf-8")


def events_from_xml(data: bytes) -> list[dict]:
    root = ET.fromstring(data)
    if root.tag != "events":
        raise ValueError(f"expected <events> root, got <{root.tag}>")
    events = []
    for el in root.findall("event"):
        ev: dict = {"kind": el.get("kind")}
        for key in ("x", "y", "x2", "y2"):
            if el.get(key) is not None:
                ev[key] = float(el.get(key))
        if el.get("text") is not None:
            ev["text"] = el.get("text")
        events.append(ev)
    return events


def make_flow_app(
    name: str,
    screens: int = 4,
    seed: int = 1,
    with_labels: bool = True,
) -> tuple[AppSpec, list[WalkStep]]:
    """A chain-of-screens app plus a walk that visits every screen and returns.

    Each screen has a header bar, a 2x2 card grid whose first card advances to
    the next screen, and a bottom action row. The walk taps through the chain,
    types into a field, swipes, and backs out once, exercising every operation
    kind.
    """
    rng = np.random.default_rng(seed)
    spec_screens = []
    walk: list[WalkStep] = []
    for i in range(screens):
        this = f"s{i}"
        nxt = f"s{i + 1}" if i + 1 < screens else None
        seeds = rng.integers(1, 2**31 - 1, size=8)
        widgets = [
            WidgetSpec(
                id=f"{this}_header", x=0.05, y=0.03, w=0.90, h=0.07,
                texture_seed=int(seeds[0]),
                label=f"Screen {i}" if with_labels else "",
            ),
            WidgetSpec(
                id=f"{this}_card0", x=0.06, y=0.17, w=0.40, h=0.14,
                target=nxt, texture_seed=int(seeds[1]),
                label="Open" if with_labels else "",
            ),
            WidgetSpec(
                id=f"{this}_card1", x=0.54, y=0.17, w=0.40, h=0.14,
                texture_seed=int(seeds[2]),
                label="News" if with_labels else "",
            ),
            WidgetSpec(
                id=f"{this}_card2", x=0.06, y=0.38, w=0.40, h=0.14,
                texture_seed=int(seeds[3]),
            ),
            WidgetSpec(
                id=f"{this}_card3", x=0.54, y=0.38, w=0.40, h=0.14,
                texture_seed=int(seeds[4]),
            ),
            WidgetSpec(
                id=f"{this}_field", x=0.06, y=0.60, w=0.88, h=0.09,
                op=OpKind.TEXT_INPUT, texture_seed=int(seeds[5]),
            ),
            WidgetSpec(
                id=f"{this}_list", x=0.06, y=0.74, w=0.88, h=0.12,
                op=OpKind.SWIPE, texture_seed=int(seeds[6]),
            ),
            WidgetSpec(
                id=f"{this}_menu", x=0.06, y=0.90, w=0.28, h=0.07,
                op=OpKind.LONG_PRESS, texture_seed=int(seeds[7]),
            ),
        ]
        spec_screens.append(ScreenSpec(name=this, widgets=tuple(widgets)))

        walk.append(WalkStep(OpKind.TEXT_INPUT, f"{this}_field", payload=f"note {i}"))
        walk.append(WalkStep(OpKind.LONG_PRESS, f"{this}_menu"))
        if nxt:
            walk.append(WalkStep(OpKind.TAP, f"{this}_card0"))
    # Visit the far end, swipe there, then pop back once.
    last = f"s{screens - 1}"
    walk.append(WalkStep(OpKind.SWIPE, f"{last}_list"))
    walk.append(WalkStep(OpKind.BACK))

    app = AppSpec(name=name, initial="s0", screens=tuple(spec_screens))
    return app, walk
