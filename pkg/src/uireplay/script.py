"""Platform-independent test script model and its nested-directory persistence.

A script is an ordered list of recorded operation steps. Each step carries the
full-screen screenshot, the cropped widget screenshot, the widget box and the
operated point in relative coordinates, the widget text, and the recording
device metadata. On disk a script is one directory per step:

    <script_id>/
      manifest.xml
      000/activity.png
      000/widget.png
      000/step.xml
      001/...

Relative coordinates are written with 6 fractional digits.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .geometry import PixelBox, RelBox, RelPoint
from .imaging import RasterImage, crop, decode_png, encode_png

COORD_DIGITS = 6

# Steps without a real widget (back, free-typed text) carry this sentinel box.
FULL_SCREEN_BOX = RelBox(RelPoint(0.0, 0.0), RelPoint(1.0, 1.0))


class ScriptError(ValueError):
    """Raised when a script value or its on-disk form violates the model."""


@dataclass(frozen=True)
class DeviceMeta:
    """Recording device identity: serial number and pixel resolution."""

    serial: str
    resolution: tuple[int, int]

    def __post_init__(self):
        if not self.serial:
            raise ScriptError("device serial must be non-empty")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ScriptError(f"bad device resolution {self.resolution}")


class OpKind(str, Enum):
    TAP = "tap"
    LONG_PRESS = "long_press"
    SWIPE = "swipe"
    TEXT_INPUT = "text_input"
    BACK = "back"


@dataclass(frozen=True)
class Operation:
    """One user operation: kind plus swipe endpoints or typed payload."""

    kind: OpKind
    swipe_start: RelPoint | None = None
    swipe_end: RelPoint | None = None
    payload: str = ""

    def __post_init__(self):
        if self.kind is OpKind.SWIPE:
            if self.swipe_start is None or self.swipe_end is None:
                raise ScriptError("swipe needs start and end points")
            if self.swipe_start == self.swipe_end:
                raise ScriptError("swipe start and end must differ")
        else:
            if self.swipe_start is not None or self.swipe_end is not None:
                raise ScriptError(f"{self.kind.value} does not take swipe points")
        if self.payload and self.kind is not OpKind.TEXT_INPUT:
            raise ScriptError(f"{self.kind.value} does not take a text payload")


@dataclass(frozen=True)
class OperationStep:
    """One recorded 7-tuple: operation, screenshots, geometry, text, device."""

    op: Operation
    activity_image: RasterImage
    widget_image: RasterImage
    widget_box: RelBox
    op_point: RelPoint
    text: str
    device: DeviceMeta

    def violations(self) -> list[str]:
        """Invariant violations for this step, empty when well-formed."""
        problems = []
        if not self.widget_box.contains(self.op_point):
            problems.append(
                f"op_point ({self.op_point.x:.6f}, {self.op_point.y:.6f}) "
                f"outside widget_box"
            )
        w, h = self.device.resolution
        expect_w = (self.widget_box.bottom_right.x - self.widget_box.top_left.x) * w
        expect_h = (self.widget_box.bottom_right.y - self.widget_box.top_left.y) * h
        if abs(self.widget_image.width - expect_w) > 1.0 + 1e-9:
            problems.append(
                f"widget image width {self.widget_image.width} vs box width {expect_w:.2f}"
            )
        if abs(self.widget_image.height - expect_h) > 1.0 + 1e-9:
            problems.append(
                f"widget image height {self.widget_image.height} vs box height {expect_h:.2f}"
            )
        return problems


@dataclass(frozen=True)
class Script:
    """An ordered recording. The id is `<serial>-<UTC timestamp>`."""

    id: str
    steps: tuple[OperationStep, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


def script_id(device: DeviceMeta, when: datetime | None = None) -> str:
    """Compose a script id from the device serial and a UTC timestamp."""
    when = when or datetime.now(timezone.utc)
    stamp = when.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"{device.serial}-{stamp}"


def make_step(
    activity_img: RasterImage,
    widget_box_px: PixelBox,
    op_point_px: tuple[int, int],
    op: Operation,
    text: str,
    device: DeviceMeta,
) -> OperationStep:
    """Build a step from pixel-space inputs, normalizing by the device resolution.

    `widget_box_px` spans the half-open pixel range [x0, x1) x [y0, y1), so a
    full-screen widget on a W x H device is (0, 0, W, H) and normalizes to the
    (0,0)-(1,1) box. The widget screenshot is cropped from the activity
    screenshot over exactly that span.
    """
    w, h = device.resolution
    if (activity_img.width, activity_img.height) != (w, h):
        raise ScriptError(
            f"activity image {activity_img.width}x{activity_img.height} "
            f"does not match device resolution {w}x{h}"
        )
    b = widget_box_px
    if b.x0 >= b.x1 or b.y0 >= b.y1:
        raise ScriptError(f"zero-area widget box {b}")
    if b.x1 > w or b.y1 > h:
        raise ScriptError(f"widget box {b} outside {w}x{h} screenshot")
    px, py = op_point_px
    if not (b.x0 <= px < b.x1 and b.y0 <= py < b.y1):
        raise ScriptError(f"operated point {op_point_px} outside widget box {b}")

    widget_img = crop(activity_img, PixelBox(b.x0, b.y0, b.x1 - 1, b.y1 - 1))
    widget_box = RelBox(RelPoint(b.x0 / w, b.y0 / h), RelPoint(b.x1 / w, b.y1 / h))
    op_point = RelPoint(px / w, py / h)
    return OperationStep(
        op=op,
        activity_image=activity_img,
        widget_image=widget_img,
        widget_box=widget_box,
        op_point=op_point,
        text=text,
        device=device,
    )


def validate_script(script: Script) -> list[str]:
    """All invariant violations in the script; an empty list means valid."""
    problems = []
    for i, step in enumerate(script.steps):
        problems.extend(f"step {i}: {p}" for p in step.violations())
    metas = {step.device for step in script.steps}
    if len(metas) > 1:
        problems.append(f"steps carry {len(metas)} different device metadata values")
    return problems


def _fmt(v: float) -> str:
    # 6 fractional digits when that is lossless, full precision otherwise, so
    # load(save(s)) stays an identity.
    s = f"{v:.{COORD_DIGITS}f}"
    return s if float(s) == v else repr(v)


def _require(condition: bool, message: str):
    if not condition:
        raise ScriptError(message)


def _step_dir_name(index: int) -> str:
    return f"{index:03d}"


def save_script(script: Script, root_path: str | Path) -> Path:
    """Persist the script as a nested directory under `root_path`.

    Refuses to overwrite an existing directory with the same script id and
    refuses empty scripts.
    """
    _require(len(script.steps) > 0, "cannot save an empty script")
    problems = validate_script(script)
    if problems:
        raise ScriptError(f"invalid script: {problems[0]}")

    root = Path(root_path) / script.id
    if root.exists():
        raise ScriptError(f"script directory already exists: {root}")
    try:
        root.mkdir(parents=True)
        manifest = ET.Element("script", id=script.id)
        for i, step in enumerate(script.steps):
            attrs = {"index": str(i), "op": step.op.kind.value, "text": step.text}
            if step.op.kind is OpKind.SWIPE:
                attrs["end_x"] = _fmt(step.op.swipe_end.x)
                attrs["end_y"] = _fmt(step.op.swipe_end.y)
            if step.op.kind is OpKind.TEXT_INPUT:
                attrs["payload"] = step.op.payload
            ET.SubElement(manifest, "step", attrs)

            step_dir = root / _step_dir_name(i)
            step_dir.mkdir()
            (step_dir / "activity.png").write_bytes(encode_png(step.activity_image))
            (step_dir / "widget.png").write_bytes(encode_png(step.widget_image))

            meta = ET.Element("step")
            ET.SubElement(
                meta,
                "widget_box",
                x0=_fmt(step.widget_box.top_left.x),
                y0=_fmt(step.widget_box.top_left.y),
                x1=_fmt(step.widget_box.bottom_right.x),
                y1=_fmt(step.widget_box.bottom_right.y),
            )
            ET.SubElement(meta, "op_point", x=_fmt(step.op_point.x), y=_fmt(step.op_point.y))
            ET.SubElement(
                meta,
                "device",
                serial=step.device.serial,
                w=str(step.device.resolution[0]),
                h=str(step.device.resolution[1]),
            )
            (step_dir / "step.xml").write_bytes(ET.tostring(meta, encoding="utf-8"))
        (root / "manifest.xml").write_bytes(ET.tostring(manifest, encoding="utf-8"))
    except OSError as exc:
        raise ScriptError(f"failed writing script to {root}: {exc}") from exc
    return root


def _parse_xml(path: Path) -> ET.Element:
    _require(path.is_file(), f"missing file: {path}")
    try:
        return ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise ScriptError(f"malformed XML in {path}: {exc}") from exc


def load_script(root_path: str | Path) -> Script:
    """Load a script directory produced by save_script.

    load(save(s)) is value-equal to s; screenshots are compared pixel-wise.
    Errors name the offending step index.
    """
    root = Path(root_path)
    manifest = _parse_xml(root / "manifest.xml")
    _require(manifest.tag == "script", f"unexpected manifest root <{manifest.tag}>")
    sid = manifest.get("id")
    _require(bool(sid), "manifest missing script id")

    steps = []
    for entry in manifest.findall("step"):
        i = len(steps)
        _require(
            entry.get("index") == str(i),
            f"step {i}: manifest index mismatch (got {entry.get('index')!r})",
        )
        step_dir = root / _step_dir_name(i)
        _require(step_dir.is_dir(), f"step {i}: missing directory {step_dir.name}/")
        try:
            activity = decode_png((step_dir / "activity.png").read_bytes())
            widget = decode_png((step_dir / "widget.png").read_bytes())
        except FileNotFoundError as exc:
            raise ScriptError(f"step {i}: missing screenshot: {exc.filename}") from exc
        except ValueError as exc:
            raise ScriptError(f"step {i}: {exc}") from exc

        try:
            meta = _parse_xml(step_dir / "step.xml")
        except ScriptError as exc:
            raise ScriptError(f"step {i}: {exc}") from exc
        try:
            box_el = meta.find("widget_box")
            pt_el = meta.find("op_point")
            dev_el = meta.find("device")
            _require(
                box_el is not None and pt_el is not None and dev_el is not None,
                f"step {i}: step.xml missing widget_box/op_point/device",
            )
            widget_box = RelBox(
                RelPoint(float(box_el.get("x0")), float(box_el.get("y0"))),
                RelPoint(float(box_el.get("x1")), float(box_el.get("y1"))),
            )
            op_point = RelPoint(float(pt_el.get("x")), float(pt_el.get("y")))
            device = DeviceMeta(
                serial=dev_el.get("serial", ""),
                resolution=(int(dev_el.get("w")), int(dev_el.get("h"))),
            )
            kind = OpKind(entry.get("op"))
            if kind is OpKind.SWIPE:
                op = Operation(
                    kind,
                    swipe_start=op_point,
                    swipe_end=RelPoint(float(entry.get("end_x")), float(entry.get("end_y"))),
                )
            elif kind is OpKind.TEXT_INPUT:
                op = Operation(kind, payload=entry.get("payload", ""))
            else:
                op = Operation(kind)
        except ScriptError as exc:
            if str(exc).startswith(f"step {i}:"):
                raise
            raise ScriptError(f"step {i}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ScriptError(f"step {i}: {exc}") from exc

        step = OperationStep(
            op=op,
            activity_image=activity,
            widget_image=widget,
            widget_box=widget_box,
            op_point=op_point,
            text=entry.get("text", ""),
            device=device,
        )
        bad = step.violations()
        _require(not bad, f"step {i}: {bad[0] if bad else ''}")
        steps.append(step)

    script = Script(id=sid, steps=tuple(steps))
    _require(len(script.steps) > 0, "script has no steps")
    script_problems = validate_script(script)
    _require(not script_problems, script_problems[0] if script_problems else "")
    return script
