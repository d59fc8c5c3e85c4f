"""Recording: turn live user events into script steps, interactively or headless.

The recorder is image-driven on the record side too: the widget box for an
event comes from layout characterization of the screenshot the user saw, so no
platform view hierarchy is ever consulted. A screenshot token accompanies
every served frame and must come back with the event; if the screen moved on
in between, the event is rejected instead of being attached to the wrong
frame.

The HTTP service is local-only plumbing for the browser frontend:

    GET  /screen   current frame as PNG + X-Screenshot-Token header
    GET  /layout   layout XML for the current frame
    GET  /steps    summaries of the steps recorded so far
    POST /event    XML or form body: kind, x, y, [x2, y2], [text], token
    POST /save     persist the script, reset the session
    GET  /         recorder UI assets
"""

from __future__ import annotations

import hashlib
import threading
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import EngineConfig
from .device import DeviceBackend, SimulatedDevice
from .geometry import PixelBox, RelPoint
from .imaging import RasterImage, encode_png, to_grayscale
from .layout import LayoutMap, assign_text, characterize_screen, layout_to_xml, tuple_of_point
from .replay import StepExpectation, expectations_to_xml
from .script import (
    FULL_SCREEN_BOX,
    DeviceMeta,
    Operation,
    OperationStep,
    OpKind,
    Script,
    ScriptError,
    make_step,
    save_script,
    script_id,
)

FALLBACK_BOX_FRAC = 0.10  # widget box when the layout has no entries at all


class StaleTokenError(RuntimeError):
    """The event was issued against a frame the device has already left."""


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class RecordedEvent:
    kind: OpKind
    point: RelPoint | None = None
    end: RelPoint | None = None
    text: str = ""


def event_from_mapping(ev: dict) -> RecordedEvent:
    kind = OpKind(ev["kind"])
    if kind is OpKind.BACK:
        return RecordedEvent(kind=kind)
    point = RelPoint(float(ev["x"]), float(ev["y"]))
    end = None
    if kind is OpKind.SWIPE:
        end = RelPoint(float(ev["x2"]), float(ev["y2"]))
    return RecordedEvent(kind=kind, point=point, end=end, text=str(ev.get("text", "")))


class RecordingSession:
    """Algorithm state for one in-progress recording on one device."""

    def __init__(self, device: DeviceBackend, cfg: EngineConfig | None = None):
        self.device = device
        self.cfg = (cfg or EngineConfig()).validate()
        self.steps: list[OperationStep] = []
        self.expectations: list[StepExpectation] = []
        self.review_flags: list[bool] = []
        self._screen: RasterImage | None = None
        self._png: bytes | None = None
        self._token: str | None = None
        self._layout: LayoutMap | None = None
        self._counter = 0

    @property
    def token(self) -> str | None:
        return self._token

    def refresh(self) -> tuple[bytes, str]:
        """Capture the current frame; a new token only when pixels changed."""
        img = self.device.capture()
        if self._screen is None or img != self._screen:
            self._counter += 1
            digest = hashlib.sha1(img.pixels).hexdigest()[:8]
            self._token = f"t{self._counter}-{digest}"
            self._screen = img
            self._png = encode_png(img)
            self._layout = None
        return self._png, self._token

    def layout(self) -> LayoutMap:
        if self._screen is None:
            self.refresh()
        if self._layout is None:
            layout = characterize_screen(to_grayscale(self._screen), self.cfg)
            if isinstance(self.device, SimulatedDevice):
                regions = list(self.device.current_screen.ocr_regions)
                if regions:
                    layout = assign_text(layout, regions)
            self._layout = layout
        return self._layout

    def _device_meta(self) -> DeviceMeta:
        meta = DeviceMeta(self.device.serial, self.device.resolution)
        if self.steps and self.steps[0].device != meta:
            raise RecordError(
                f"device changed mid-recording: {self.steps[0].device} -> {meta}"
            )
        return meta

    def on_event(self, event: RecordedEvent, token: str | None = None) -> tuple[OperationStep, bool]:
        """Convert a user event into a step, append it, advance the device.

        Returns the step and a review flag; the flag is set when the event
        point fell into no layout entry and a fallback box was used.
        """
        if self._screen is None:
            self.refresh()
        if token is not None and token != self._token:
            raise StaleTokenError(f"token {token!r} is stale; refresh the screen")
        meta = self._device_meta()
        w, h = meta.resolution
        activity = self._screen

        if event.kind is OpKind.BACK:
            step = OperationStep(
                op=Operation(OpKind.BACK),
                activity_image=activity,
                widget_image=activity,
                widget_box=FULL_SCREEN_BOX,
                op_point=RelPoint(0.5, 0.5),
                text="",
                device=meta,
            )
            review = False
        else:
            layout = self.layout()
            entry = tuple_of_point(layout, event.point)
            px = min(int(event.point.x * w), w - 1)
            py = min(int(event.point.y * h), h - 1)
            if entry is None:
                half_w = max(1, int(w * FALLBACK_BOX_FRAC / 2))
                half_h = max(1, int(h * FALLBACK_BOX_FRAC / 2))
                x0, y0 = max(0, px - half_w), max(0, py - half_h)
                x1, y1 = min(w, px + half_w + 1), min(h, py + half_h + 1)
                box = PixelBox(x0, y0, x1, y1)
                text = ""
                review = True
            else:
                box = PixelBox(entry.box.x0, entry.box.y0, entry.box.x1 + 1, entry.box.y1 + 1)
                text = entry.text or ""
                review = not entry.box.contains_point(event.point.x * w, event.point.y * h)
            px = min(max(px, box.x0), box.x1 - 1)
            py = min(max(py, box.y0), box.y1 - 1)
            if event.kind is OpKind.SWIPE:
                op = Operation(OpKind.SWIPE, swipe_start=RelPoint(px / w, py / h), swipe_end=event.end)
            elif event.kind is OpKind.TEXT_INPUT:
                op = Operation(OpKind.TEXT_INPUT, payload=event.text)
            else:
                op = Operation(event.kind)
            step = make_step(activity, box, (px, py), op, text, meta)

        result = self.device.dispatch(step.op, event.point, event.end)
        self.steps.append(step)
        self.review_flags.append(review)
        self.expectations.append(
            StepExpectation(widget_id=result.widget_id, target=result.screen)
        )
        # The projection has moved on; invalidate the served frame.
        self._screen = None
        self._png = None
        self._token = None
        self._layout = None
        return step, review

    def to_script(self, when: datetime | None = None) -> Script:
        if not self.steps:
            raise RecordError("no steps recorded")
        meta = self.steps[0].device
        return Script(id=script_id(meta, when), steps=tuple(self.steps))

    def save(self, root: str | Path, when: datetime | None = None) -> tuple[Path, Path]:
        """Persist the script plus its expectations sidecar; reset the session."""
        script = self.to_script(when)
        path = save_script(script, root)
        expected_path = Path(root) / f"{script.id}.expected.xml"
        expected_path.write_bytes(expectations_to_xml(script.id, self.expectations))
        self.steps = []
        self.expectations = []
        self.review_flags = []
        return path, expected_path


def record_events(
    device: DeviceBackend,
    events: list[RecordedEvent],
    cfg: EngineConfig | None = None,
    when: datetime | None = None,
) -> tuple[Script, list[StepExpectation], list[bool]]:
    """Headless record: run scripted events through the full record pipeline."""
    session = RecordingSession(device, cfg)
    for event in events:
        session.refresh()
        session.on_event(event, session.token)
    script = session.to_script(when)
    return script, list(session.expectations), list(session.review_flags)


def _step_summary_el(parent: ET.Element, index: int, step: OperationStep, review: bool):
    ET.SubElement(
        parent,
        "step",
        index=str(index),
        op=step.op.kind.value,
        text=step.text,
        x0=f"{step.widget_box.top_left.x:.6f}",
        y0=f"{step.widget_box.top_left.y:.6f}",
        x1=f"{step.widget_box.bottom_right.x:.6f}",
        y1=f"{step.widget_box.bottom_right.y:.6f}",
        review=str(review).lower(),
    )


_FALLBACK_PAGE = b"""<!doctype html>
<html><head><title>recorder</title></head>
<body><p>Recorder service is running. Build the frontend (frontend/dist)
to get the interactive UI, or drive the HTTP API directly.</p></body></html>
"""


class RecorderService:
    """Local HTTP server wrapping one RecordingSession."""

    def __init__(
        self,
        device: DeviceBackend,
        cfg: EngineConfig | None = None,
        save_root: str | Path = ".",
        assets_dir: str | Path | None = None,
    ):
        self.session = RecordingSession(device, cfg)
        self.save_root = Path(save_root)
        self.assets_dir = Path(assets_dir) if assets_dir else None
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self.port: int | None = None

    def start(self, port: int = 8750, host: str = "127.0.0.1") -> int:
        """Bind and serve in a background thread; returns the bound port."""
        if self._server is not None:
            raise RuntimeError("service already running")
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # tests stay quiet
                pass

            def _send(self, code: int, body: bytes, content_type: str, headers: dict | None = None):
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                for key, value in (headers or {}).items():
                    self.send_header(key, value)
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                path = urllib.parse.urlparse(self.path).path
                try:
                    if path == "/screen":
                        with service._lock:
                            png, token = service.session.refresh()
                        self._send(200, png, "image/png", {"X-Screenshot-Token": token})
                    elif path == "/layout":
                        with service._lock:
                            data = layout_to_xml(service.session.layout())
                        self._send(200, data, "application/xml")
                    elif path == "/steps":
                        with service._lock:
                            root = ET.Element("steps")
                            for i, step in enumerate(service.session.steps):
                                _step_summary_el(root, i, step, service.session.review_flags[i])
                        self._send(200, ET.tostring(root), "application/xml")
                    else:
                        self._serve_asset(path)
                except Exception as exc:  # surface, don't kill the thread
                    self._send(500, str(exc).encode(), "text/plain")

            def _serve_asset(self, path: str):
                if path == "/":
                    path = "/index.html"
                if service.assets_dir is not None:
                    target = (service.assets_dir / path.lstrip("/")).resolve()
                    if target.is_file() and service.assets_dir.resolve() in target.parents:
                        ctype = {
                            ".html": "text/html",
                            ".js": "application/javascript",
                            ".css": "text/css",
                            ".png": "image/png",
                        }.get(target.suffix, "application/octet-stream")
                        self._send(200, target.read_bytes(), ctype)
                        return
                if path == "/index.html":
                    self._send(200, _FALLBACK_PAGE, "text/html")
                else:
                    self._send(404, b"not found", "text/plain")

            def _read_body(self) -> dict:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                ctype = self.headers.get("Content-Type", "")
                if "xml" in ctype:
                    el = ET.fromstring(raw)
                    return dict(el.attrib)
                pairs = urllib.parse.parse_qsl(raw.decode("utf-8"))
                return dict(pairs)

            def do_POST(self):
                path = urllib.parse.urlparse(self.path).path
                try:
                    fields = self._read_body()
                except (ET.ParseError, UnicodeDecodeError) as exc:
                    self._send(400, f"bad request body: {exc}".encode(), "text/plain")
                    return
                try:
                    if path == "/event":
                        token = fields.pop("token", None)
                        event = event_from_mapping(fields)
                        with service._lock:
                            step, review = service.session.on_event(event, token)
                            index = len(service.session.steps) - 1
                        root = ET.Element("recorded")
                        _step_summary_el(root, index, step, review)
                        self._send(200, ET.tostring(root), "application/xml")
                    elif path == "/save":
                        root_dir = fields.get("root") or str(service.save_root)
                        with service._lock:
                            script_path, expected_path = service.session.save(root_dir)
                        el = ET.Element(
                            "saved",
                            id=script_path.name,
                            path=str(script_path),
                            expected=str(expected_path),
                        )
                        self._send(200, ET.tostring(el), "application/xml")
                    else:
                        self._send(404, b"not found", "text/plain")
                except StaleTokenError as exc:
                    self._send(409, str(exc).encode(), "text/plain")
                except (RecordError, ScriptError, KeyError, ValueError) as exc:
                    self._send(400, str(exc).encode(), "text/plain")
                except Exception as exc:
                    self._send(500, str(exc).encode(), "text/plain")

        self._server = ThreadingHTTPServer((host, port), Handler)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.port

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
            self._thread = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()
