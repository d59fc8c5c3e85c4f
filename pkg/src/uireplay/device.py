"""Device drivers: an abstract capture/dispatch interface, one deterministic
simulator built from session fixtures, and not-implemented stubs for real
ADB/WDA transports.

A simulated session is a set of screens (PNG renders), per-screen ground-truth
regions that respond to specific operation kinds, and transition edges. It
stands in for a physical device so replay accuracy is measurable and
regression-testable at desk scale.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import PixelBox, RelPoint
from .imaging import RasterImage, decode_png
from .layout import TextRegion, load_ocr_sidecar
from .script import OpKind, Operation


class SessionError(ValueError):
    """Raised for invalid session fixtures."""


@dataclass(frozen=True)
class Region:
    """A ground-truth interactive area: box, accepted op kind, transition target."""

    box: PixelBox
    op: OpKind
    target: str
    widget_id: str


@dataclass(frozen=True)
class Screen:
    name: str
    png_path: Path
    resolution: tuple[int, int]
    regions: tuple[Region, ...]
    ocr_regions: tuple[TextRegion, ...] = ()


@dataclass(frozen=True)
class SimulatedSession:
    name: str
    serial: str
    initial: str
    screens: dict[str, Screen]

    def __post_init__(self):
        if self.initial not in self.screens:
            raise SessionError(f"initial screen {self.initial!r} does not exist")
        for screen in self.screens.values():
            w, h = screen.resolution
            for region in screen.regions:
                if not region.box.within_bounds(w, h):
                    raise SessionError(
                        f"region {region.widget_id!r} on {screen.name!r} exceeds "
                        f"{w}x{h} bounds"
                    )
                if region.target not in self.screens:
                    raise SessionError(
                        f"region {region.widget_id!r} on {screen.name!r} targets "
                        f"unknown screen {region.target!r}"
                    )


@dataclass(frozen=True)
class HitResult:
    hit: bool
    widget_id: str | None
    screen: str  # current screen after the dispatch


@dataclass
class DeviceState:
    current: str
    history: list[str] = field(default_factory=list)
    log: list[tuple[str, str | None, bool]] = field(default_factory=list)


class DeviceBackend(ABC):
    """Capture/dispatch/resolution contract every driver implements."""

    @property
    @abstractmethod
    def serial(self) -> str: ...

    @property
    @abstractmethod
    def resolution(self) -> tuple[int, int]: ...

    @abstractmethod
    def capture(self) -> RasterImage: ...

    @abstractmethod
    def dispatch(
        self, op: Operation, point: RelPoint | None = None, end: RelPoint | None = None
    ) -> HitResult: ...


def load_session(path: str | Path) -> SimulatedSession:
    """Load a session fixture directory (session.xml plus screen PNGs)."""
    root_dir = Path(path)
    manifest = root_dir / "session.xml" if root_dir.is_dir() else root_dir
    if not manifest.is_file():
        raise SessionError(f"missing session manifest: {manifest}")
    base = manifest.parent
    try:
        root = ET.parse(manifest).getroot()
    except ET.ParseError as exc:
        raise SessionError(f"malformed session manifest: {exc}") from exc
    if root.tag != "session":
        raise SessionError(f"expected <session> root, got <{root.tag}>")
    initial = root.get("initial")
    if not initial:
        raise SessionError("session manifest missing initial screen")

    screens: dict[str, Screen] = {}
    for el in root.findall("screen"):
        name = el.get("name")
        if not name:
            raise SessionError("screen element missing name")
        if name in screens:
            raise SessionError(f"duplicate screen {name!r}")
        png = base / el.get("png", "")
        if not png.is_file():
            raise SessionError(f"screen {name!r}: missing image file {png}")
        resolution = (int(el.get("w")), int(el.get("h")))
        regions = []
        for i, rel in enumerate(el.findall("region")):
            try:
                box = PixelBox(
                    int(rel.get("x0")), int(rel.get("y0")),
                    int(rel.get("x1")), int(rel.get("y1")),
                )
            except (TypeError, ValueError) as exc:
                raise SessionError(f"screen {name!r} region {i}: {exc}") from exc
            regions.append(
                Region(
                    box=box,
                    op=OpKind(rel.get("op", "tap")),
                    target=rel.get("target", name),
                    widget_id=rel.get("id", f"{name}_{i}"),
                )
            )
        ocr = ()
        sidecar = el.get("ocr")
        if sidecar:
            ocr = tuple(load_ocr_sidecar(base / sidecar, resolution))
        screens[name] = Screen(
            name=name,
            png_path=png,
            resolution=resolution,
            regions=tuple(regions),
            ocr_regions=ocr,
        )
    return SimulatedSession(
        name=root.get("name", base.name),
        serial=root.get("serial", root.get("name", base.name)),
        initial=initial,
        screens=screens,
    )


class SimulatedDevice(DeviceBackend):
    """Deterministic device: screen images from fixtures, region hit testing.

    A dispatch that lands in no matching region is a no-op miss, like a dead
    tap on a real app. `back` pops the screen-history stack.
    """

    def __init__(self, session: SimulatedSession):
        self.session = session
        self.state = DeviceState(current=session.initial)
        self._png_cache: dict[str, RasterImage] = {}

    @property
    def serial(self) -> str:
        return self.session.serial

    @property
    def resolution(self) -> tuple[int, int]:
        return self.session.screens[self.state.current].resolution

    @property
    def current_screen(self) -> Screen:
        return self.session.screens[self.state.current]

    def capture(self) -> RasterImage:
        name = self.state.current
        if name not in self._png_cache:
            self._png_cache[name] = decode_png(
                self.session.screens[name].png_path.read_bytes()
            )
        img = self._png_cache[name]
        if (img.width, img.height) != self.current_screen.resolution:
            raise SessionError(
                f"screen {name!r} PNG is {img.width}x{img.height}, manifest says "
                f"{self.current_screen.resolution}"
            )
        return img

    def hit_test(self, kind: OpKind, point: RelPoint | None) -> Region | None:
        """The region a dispatch at `point` would activate; read-only."""
        if kind is OpKind.BACK or point is None:
            return None
        screen = self.current_screen
        px, py = point.to_pixels(screen.resolution)
        hits = [
            r for r in screen.regions
            if r.op is kind and r.box.contains_point(px, py)
        ]
        if not hits:
            return None
        # Smallest area wins; manifest order breaks ties.
        best = hits[0]
        for r in hits[1:]:
            if r.box.area < best.box.area:
                best = r
        return best

    def dispatch(
        self, op: Operation, point: RelPoint | None = None, end: RelPoint | None = None
    ) -> HitResult:
        if op.kind is OpKind.BACK:
            if self.state.history:
                self.state.current = self.state.history.pop()
                result = HitResult(True, None, self.state.current)
            else:
                result = HitResult(False, None, self.state.current)
            self.state.log.append(("back", None, result.hit))
            return result

        # Swipes hit by their start point.
        region = self.hit_test(op.kind, point)
        if region is None:
            result = HitResult(False, None, self.state.current)
        else:
            if region.target != self.state.current:
                # Only real screen changes go on the back stack.
                self.state.history.append(self.state.current)
                self.state.current = region.target
            result = HitResult(True, region.widget_id, self.state.current)
        self.state.log.append((op.kind.value, result.widget_id, result.hit))
        return result


class AdbDriver(DeviceBackend):
    """Android transport placeholder; real instruction translation is out of scope."""

    def __init__(self, serial: str = ""):
        self._serial = serial

    @property
    def serial(self) -> str:
        return self._serial

    @property
    def resolution(self) -> tuple[int, int]:
        raise NotImplementedError("adb transport requires a connected device")

    def capture(self) -> RasterImage:
        raise NotImplementedError("adb transport requires a connected device")

    def dispatch(self, op, point=None, end=None) -> HitResult:
        raise NotImplementedError("adb transport requires a connected device")


class WdaDriver(DeviceBackend):
    """iOS transport placeholder; real instruction translation is out of scope."""

    def __init__(self, serial: str = ""):
        self._serial = serial

    @property
    def serial(self) -> str:
        return self._serial

    @property
    def resolution(self) -> tuple[int, int]:
        raise NotImplementedError("wda transport requires a connected device")

    def capture(self) -> RasterImage:
        raise NotImplementedError("wda transport requires a connected device")

    def dispatch(self, op, point=None, end=None) -> HitResult:
        raise NotImplementedError("wda transport requires a connected device")
