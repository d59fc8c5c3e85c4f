"""Replay: relocate each recorded widget on the live screen and dispatch.

Per step, the feature arm proposes a set of candidate boxes and the layout arm
proposes exactly one. With several feature candidates, the one nearest the
layout candidate wins. The dispatched point blends the two arms' centers with
the fusion weight gamma and then applies the recorded offset of the operated
point within its widget box, so taps land where the recorder tapped rather
than at widget centers. Degenerate cases: an empty feature set falls back to
the layout arm alone (gamma = 0 in effect), a missing layout arm uses the best
feature candidate (gamma = 1), and a step with neither arm fails without a
dispatch.

Success on the simulator means the dispatched point activated the expected
ground-truth region and the expected transition fired. Failed steps do not
abort the script; replay continues against whatever screen the device then
shows.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from .config import EngineConfig
from .device import DeviceBackend, SimulatedDevice
from .features import CandidateBox, extract_features, locate_candidates
from .geometry import RelPoint
from .imaging import GrayImage, RasterImage, to_grayscale
from .layout import (
    LayoutMap,
    TextRegion,
    characterize_screen,
    locate_by_tuple,
    tuple_of_point,
)
from .script import FULL_SCREEN_BOX, OperationStep, OpKind, Script


class ReplayError(RuntimeError):
    """Raised when the device itself fails (capture/dispatch), not a step miss."""


@dataclass(frozen=True)
class StepOutcome:
    """What happened to one step: both arms' picks, the dispatch, the verdict."""

    index: int
    image_candidate: CandidateBox | None
    layout_candidate: CandidateBox | None
    dispatched_point: RelPoint | None
    success: bool
    image_ok: bool
    layout_ok: bool
    final_ok: bool
    note: str = ""

    def __post_init__(self):
        has_candidate = self.image_candidate is not None or self.layout_candidate is not None
        if (self.dispatched_point is not None) != has_candidate and self.note != "bypass":
            raise ValueError("dispatched_point is defined iff a candidate exists")


@dataclass(frozen=True)
class ReplayReport:
    script_id: str
    device_id: str
    outcomes: tuple[StepOutcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    @property
    def accuracy(self) -> float:
        return replay_accuracy(self)


def replay_accuracy(report: ReplayReport) -> float:
    """Successful steps over total steps; undefined for an empty report."""
    if not report.outcomes:
        raise ValueError("replay accuracy is undefined for an empty report")
    return sum(1 for o in report.outcomes if o.success) / len(report.outcomes)


@dataclass(frozen=True)
class StepExpectation:
    """Ground truth for scoring one step: which widget and which destination."""

    widget_id: str | None
    target: str


@dataclass(frozen=True)
class ResolvedTarget:
    image_candidates: tuple[CandidateBox, ...]
    image_choice: CandidateBox | None
    layout_choice: CandidateBox | None
    point: RelPoint | None
    delta: tuple[float, float] | None  # blended center minus recorded box center


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


def _rel_center(c: CandidateBox, resolution: tuple[int, int]) -> tuple[float, float]:
    cx, cy = c.box.center
    return cx / resolution[0], cy / resolution[1]


def arm_point(
    candidate: CandidateBox, step: OperationStep, replay_resolution: tuple[int, int]
) -> RelPoint:
    """Where this arm alone would dispatch: its center plus the recorded offset."""
    cx, cy = _rel_center(candidate, replay_resolution)
    box_center = step.widget_box.center
    return RelPoint(
        _clamp01(cx + (step.op_point.x - box_center.x)),
        _clamp01(cy + (step.op_point.y - box_center.y)),
    )


def choose_image_candidate(
    omega: list[CandidateBox] | tuple[CandidateBox, ...],
    layout_choice: CandidateBox | None,
    resolution: tuple[int, int],
) -> CandidateBox | None:
    """Pick the feature arm's winner: a sole candidate stands, otherwise the
    one whose center is nearest the layout candidate's center (in relative
    coordinates); without a layout arm, the best-scored candidate."""
    if not omega:
        return None
    if len(omega) == 1 or layout_choice is None:
        return omega[0]
    lx, ly = _rel_center(layout_choice, resolution)
    return min(
        omega,
        key=lambda c: (
            (_rel_center(c, resolution)[0] - lx) ** 2
            + (_rel_center(c, resolution)[1] - ly) ** 2
        ),
    )


def _gray_cached(img: RasterImage, cache: dict | None) -> GrayImage:
    if cache is None:
        return to_grayscale(img)
    key = ("gray", hashlib.sha1(img.pixels).hexdigest())
    if key not in cache:
        cache[key] = to_grayscale(img)
    return cache[key]


def _layout_cached(gray: GrayImage, cfg: EngineConfig, cache: dict | None) -> LayoutMap:
    if cache is None:
        return characterize_screen(gray, cfg)
    key = ("layout", hashlib.sha1(gray.pixels).hexdigest())
    if key not in cache:
        cache[key] = characterize_screen(gray, cfg)
    return cache[key]


def _features_cached(gray: GrayImage, cache: dict | None):
    if cache is None:
        return extract_features(gray)
    key = ("features", hashlib.sha1(gray.pixels).hexdigest())
    if key not in cache:
        cache[key] = extract_features(gray)
    return cache[key]


def resolve_target(
    step: OperationStep,
    screen: RasterImage,
    replay_resolution: tuple[int, int],
    cfg: EngineConfig | None = None,
    *,
    ocr_regions: list[TextRegion] | None = None,
    cache: dict | None = None,
) -> ResolvedTarget:
    """Run both matchers for one step and fuse their target points."""
    cfg = cfg or EngineConfig()
    if (screen.width, screen.height) != tuple(replay_resolution):
        raise ReplayError(
            f"screen is {screen.width}x{screen.height}, replay resolution is "
            f"{replay_resolution[0]}x{replay_resolution[1]}"
        )

    widget_gray = _gray_cached(step.widget_image, cache)
    screen_gray = _gray_cached(screen, cache)
    omega = locate_candidates(
        widget_gray,
        screen_gray,
        cfg,
        target_features=_features_cached(widget_gray, cache),
        source_features=_features_cached(screen_gray, cache),
    )

    recorded_gray = _gray_cached(step.activity_image, cache)
    recorded_layout = _layout_cached(recorded_gray, cfg, cache)
    recorded_entry = tuple_of_point(recorded_layout, step.op_point)

    layout_choice = None
    if recorded_entry is not None:
        replay_layout = _layout_cached(screen_gray, cfg, cache)
        layout_choice = locate_by_tuple(
            replay_layout,
            recorded_entry.address,
            step.text,
            ocr_regions=ocr_regions,
            config=cfg,
        )

    image_choice = choose_image_candidate(omega, layout_choice, replay_resolution)

    box_center = step.widget_box.center
    off_x = step.op_point.x - box_center.x
    off_y = step.op_point.y - box_center.y

    point = None
    delta = None
    if image_choice is not None and layout_choice is not None:
        ix, iy = _rel_center(image_choice, replay_resolution)
        lx, ly = _rel_center(layout_choice, replay_resolution)
        bx = cfg.gamma * ix + (1.0 - cfg.gamma) * lx
        by = cfg.gamma * iy + (1.0 - cfg.gamma) * ly
    elif image_choice is not None:
        bx, by = _rel_center(image_choice, replay_resolution)
    elif layout_choice is not None:
        bx, by = _rel_center(layout_choice, replay_resolution)
    else:
        bx = by = None
    if bx is not None:
        point = RelPoint(_clamp01(bx + off_x), _clamp01(by + off_y))
        delta = (bx - box_center.x, by - box_center.y)

    return ResolvedTarget(
        image_candidates=tuple(omega),
        image_choice=image_choice,
        layout_choice=layout_choice,
        point=point,
        delta=delta,
    )


def _arm_hits(
    device: DeviceBackend,
    kind: OpKind,
    point: RelPoint | None,
    expectation: StepExpectation | None,
) -> bool:
    if point is None or not isinstance(device, SimulatedDevice):
        return False
    region = device.hit_test(kind, point)
    if region is None:
        return False
    if expectation is None:
        return True
    return region.widget_id == expectation.widget_id and region.target == expectation.target


def replay_script(
    script: Script,
    device: DeviceBackend,
    cfg: EngineConfig | None = None,
    expectations: list[StepExpectation] | None = None,
) -> ReplayReport:
    """Replay every step in order and score the run.

    With `expectations` (recorded alongside the script on a simulated
    session), success requires the expected widget id and the expected
    destination screen; without them, any op-matching hit that fires its
    transition counts.
    """
    cfg = (cfg or EngineConfig()).validate()
    if expectations is not None and len(expectations) != len(script.steps):
        raise ValueError(
            f"{len(expectations)} expectations for {len(script.steps)} steps"
        )
    cache: dict = {}
    outcomes = []
    steps = script.steps
    if cfg.max_steps is not None:
        steps = steps[: cfg.max_steps]

    for i, step in enumerate(steps):
        exp = expectations[i] if expectations else None
        kind = step.op.kind

        if kind is OpKind.BACK or (
            kind is OpKind.TEXT_INPUT and step.widget_box == FULL_SCREEN_BOX
        ):
            # No widget to resolve: dispatch the recorded gesture directly.
            try:
                point = None if kind is OpKind.BACK else step.op_point
                res = device.dispatch(step.op, point)
            except NotImplementedError as exc:
                raise ReplayError(f"step {i}: dispatch failed: {exc}") from exc
            success = res.hit and (exp is None or res.screen == exp.target)
            outcomes.append(
                StepOutcome(
                    index=i,
                    image_candidate=None,
                    layout_candidate=None,
                    dispatched_point=point,
                    success=success,
                    image_ok=False,
                    layout_ok=False,
                    final_ok=success,
                    note="bypass",
                )
            )
            continue

        try:
            screen = device.capture()
            resolution = device.resolution
        except (NotImplementedError, OSError) as exc:
            raise ReplayError(f"step {i}: capture failed: {exc}") from exc

        ocr_regions = None
        if isinstance(device, SimulatedDevice):
            ocr_regions = list(device.current_screen.ocr_regions) or None
        resolved = resolve_target(
            step, screen, resolution, cfg, ocr_regions=ocr_regions, cache=cache
        )

        image_pt = (
            arm_point(resolved.image_choice, step, resolution)
            if resolved.image_choice
            else None
        )
        layout_pt = (
            arm_point(resolved.layout_choice, step, resolution)
            if resolved.layout_choice
            else None
        )
        image_ok = _arm_hits(device, kind, image_pt, exp)
        layout_ok = _arm_hits(device, kind, layout_pt, exp)

        if resolved.point is None:
            outcomes.append(
                StepOutcome(
                    index=i,
                    image_candidate=None,
                    layout_candidate=None,
                    dispatched_point=None,
                    success=False,
                    image_ok=image_ok,
                    layout_ok=layout_ok,
                    final_ok=False,
                    note="missing widget",
                )
            )
            continue

        start = resolved.point
        end = None
        if kind is OpKind.SWIPE:
            dx, dy = resolved.delta
            start = RelPoint(
                _clamp01(step.op.swipe_start.x + dx), _clamp01(step.op.swipe_start.y + dy)
            )
            end = RelPoint(
                _clamp01(step.op.swipe_end.x + dx), _clamp01(step.op.swipe_end.y + dy)
            )
        try:
            res = device.dispatch(step.op, start, end)
        except NotImplementedError as exc:
            raise ReplayError(f"step {i}: dispatch failed: {exc}") from exc
        success = res.hit and (
            exp is None
            or (res.widget_id == exp.widget_id and res.screen == exp.target)
        )
        outcomes.append(
            StepOutcome(
                index=i,
                image_candidate=resolved.image_choice,
                layout_candidate=resolved.layout_choice,
                dispatched_point=resolved.point,
                success=success,
                image_ok=image_ok,
                layout_ok=layout_ok,
                final_ok=success,
                note="" if res.hit else "miss",
            )
        )

    return ReplayReport(
        script_id=script.id, device_id=device.serial, outcomes=tuple(outcomes)
    )


# Report and expectation persistence


def _fmt6(v: float) -> str:
    s = f"{v:.6f}"
    return s if float(s) == v else repr(v)


def _candidate_el(parent: ET.Element, tag: str, c: CandidateBox):
    ET.SubElement(
        parent,
        tag,
        x0=str(c.box.x0),
        y0=str(c.box.y0),
        x1=str(c.box.x1),
        y1=str(c.box.y1),
        score=_fmt6(c.score),
        support=str(c.support),
    )


def report_to_xml(report: ReplayReport) -> bytes:
    root = ET.Element(
        "report",
        script=report.script_id,
        device=report.device_id,
        accuracy=_fmt6(report.accuracy) if report.outcomes else "",
        steps=str(len(report.outcomes)),
    )
    for o in report.outcomes:
        el = ET.SubElement(
            root,
            "step",
            index=str(o.index),
            success=str(o.success).lower(),
            image_ok=str(o.image_ok).lower(),
            layout_ok=str(o.layout_ok).lower(),
            final_ok=str(o.final_ok).lower(),
            note=o.note,
        )
        if o.dispatched_point is not None:
            ET.SubElement(
                el, "dispatched", x=_fmt6(o.dispatched_point.x), y=_fmt6(o.dispatched_point.y)
            )
        if o.image_candidate is not None:
            _candidate_el(el, "image_candidate", o.image_candidate)
        if o.layout_candidate is not None:
            _candidate_el(el, "layout_candidate", o.layout_candidate)
    return ET.tostring(root, encoding="utf-8")


def _candidate_from_el(el: ET.Element | None) -> CandidateBox | None:
    if el is None:
        return None
    from .geometry import PixelBox

    return CandidateBox(
        box=PixelBox(
            int(el.get("x0")), int(el.get("y0")), int(el.get("x1")), int(el.get("y1"))
        ),
        score=float(el.get("score")),
        support=int(el.get("support")),
    )


def report_from_xml(data: bytes) -> ReplayReport:
    root = ET.fromstring(data)
    if root.tag != "report":
        raise ValueError(f"expected <report> root, got <{root.tag}>")
    outcomes = []
    for el in root.findall("step"):
        pt = el.find("dispatched")
        outcomes.append(
            StepOutcome(
                index=int(el.get("index")),
                image_candidate=_candidate_from_el(el.find("image_candidate")),
                layout_candidate=_candidate_from_el(el.find("layout_candidate")),
                dispatched_point=(
                    RelPoint(float(pt.get("x")), float(pt.get("y"))) if pt is not None else None
                ),
                success=el.get("success") == "true",
                image_ok=el.get("image_ok") == "true",
                layout_ok=el.get("layout_ok") == "true",
                final_ok=el.get("final_ok") == "true",
                note=el.get("note", ""),
            )
        )
    return ReplayReport(
        script_id=root.get("script", ""),
        device_id=root.get("device", ""),
        outcomes=tuple(outcomes),
    )


def expectations_to_xml(script_id: str, expectations: list[StepExpectation]) -> bytes:
    root = ET.Element("expected", script=script_id)
    for i, e in enumerate(expectations):
        attrs = {"index": str(i), "target": e.target}
        if e.widget_id is not None:
            attrs["widget"] = e.widget_id
        ET.SubElement(root, "step", attrs)
    return ET.tostring(root, encoding="utf-8")


def expectations_from_xml(data: bytes) -> list[StepExpectation]:
    root = ET.fromstring(data)
    if root.tag != "expected":
        raise ValueError(f"expected <expected> root, got <{root.tag}>")
    out = []
    for i, el in enumerate(root.findall("step")):
        if el.get("index") != str(i):
            raise ValueError(f"expectation index mismatch at position {i}")
        out.append(StepExpectation(widget_id=el.get("widget"), target=el.get("target", "")))
    return out


def load_expectations(path: str | Path) -> list[StepExpectation]:
    return expectations_from_xml(Path(path).read_bytes())
