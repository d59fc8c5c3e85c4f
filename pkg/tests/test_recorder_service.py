"""Recorder: headless event pipeline and the local HTTP service."""

import urllib.error
import urllib.parse
import urllib.request
import xml.etree.ElementTree as ET

import pytest

from uireplay.config import EngineConfig
from uireplay.device import SimulatedDevice, load_session
from uireplay.geometry import RelPoint
from uireplay.imaging import decode_png
from uireplay.recorder import (
    RecordedEvent,
    RecorderService,
    RecordingSession,
    StaleTokenError,
    record_events,
)
from uireplay.replay import replay_accuracy, replay_script
from uireplay.script import FULL_SCREEN_BOX, OpKind, load_script
from uireplay.synthetic import (
    AppSpec,
    ScreenSpec,
    WalkStep,
    WidgetSpec,
    build_session,
    events_for_walk,
    widget_center,
)


def recorder_app() -> AppSpec:
    home = ScreenSpec(
        name="home",
        widgets=(
            WidgetSpec("open", 0.08, 0.10, 0.84, 0.18, target="detail",
                       texture_seed=61, label="Open"),
            WidgetSpec("field", 0.08, 0.40, 0.84, 0.14, op=OpKind.TEXT_INPUT,
                       texture_seed=62),
            WidgetSpec("row", 0.08, 0.66, 0.84, 0.16, texture_seed=63, label="Row"),
        ),
    )
    detail = ScreenSpec(
        name="detail",
        widgets=(
            WidgetSpec("body", 0.08, 0.12, 0.84, 0.40, texture_seed=64),
            WidgetSpec("close", 0.08, 0.70, 0.40, 0.12, target="home", texture_seed=65),
        ),
    )
    return AppSpec(name="recapp", initial="home", screens=(home, detail))


@pytest.fixture
def device(tmp_path):
    session_dir = build_session(recorder_app(), (300, 600), tmp_path / "sess")
    return SimulatedDevice(load_session(session_dir))


class TestRecordingSession:
    def test_tap_step_uses_layout_box(self, device):
        session = RecordingSession(device)
        session.refresh()
        center = widget_center(recorder_app(), "home", "open")
        step, review = session.on_event(RecordedEvent(OpKind.TAP, center), session.token)
        assert not review
        scaled = step.widget_box.to_pixels((300, 600))
        # layout box hugs the rendered widget (0.08..0.92 x, 0.10..0.28 y)
        assert abs(scaled[0] - 0.08 * 300) <= 5
        assert abs(scaled[2] - 0.92 * 300) <= 5
        assert step.widget_box.contains(step.op_point)

    def test_stale_token_rejected(self, device):
        session = RecordingSession(device)
        session.refresh()
        with pytest.raises(StaleTokenError):
            session.on_event(
                RecordedEvent(OpKind.TAP, RelPoint(0.5, 0.2)), "t0-deadbeef"
            )

    def test_text_event_records_payload_and_focused_box(self, device):
        session = RecordingSession(device)
        session.refresh()
        center = widget_center(recorder_app(), "home", "field")
        step, _ = session.on_event(
            RecordedEvent(OpKind.TEXT_INPUT, center, text="hello"), session.token
        )
        assert step.op.kind is OpKind.TEXT_INPUT
        assert step.op.payload == "hello"
        assert step.widget_box.contains(center)

    def test_back_event_uses_sentinel_box(self, device):
        session = RecordingSession(device)
        session.refresh()
        session.on_event(
            RecordedEvent(OpKind.TAP, widget_center(recorder_app(), "home", "open")),
            session.token,
        )
        session.refresh()
        step, _ = session.on_event(RecordedEvent(OpKind.BACK), session.token)
        assert step.widget_box == FULL_SCREEN_BOX
        assert device.state.current == "home"

    def test_event_advances_projection(self, device):
        session = RecordingSession(device)
        png_before, token_before = session.refresh()
        session.on_event(
            RecordedEvent(OpKind.TAP, widget_center(recorder_app(), "home", "open")),
            token_before,
        )
        png_after, token_after = session.refresh()
        assert token_after != token_before
        assert png_after != png_before

    def test_step_activity_matches_served_frame(self, device):
        session = RecordingSession(device)
        png, token = session.refresh()
        step, _ = session.on_event(
            RecordedEvent(OpKind.TAP, widget_center(recorder_app(), "home", "open")), token
        )
        assert step.activity_image == decode_png(png)

    def test_widget_text_captured_from_ocr(self, device):
        session = RecordingSession(device)
        session.refresh()
        step, _ = session.on_event(
            RecordedEvent(OpKind.TAP, widget_center(recorder_app(), "home", "open")),
            session.token,
        )
        assert step.text == "Open"

    def test_save_requires_steps(self, device, tmp_path):
        session = RecordingSession(device)
        with pytest.raises(Exception):
            session.save(tmp_path)

    def test_save_round_trips_and_replays_clean(self, device, tmp_path):
        session = RecordingSession(device)
        app = recorder_app()
        for widget in ("open", "close"):
            session.refresh()
            screen = device.state.current
            session.on_event(
                RecordedEvent(OpKind.TAP, widget_center(app, screen, widget)), session.token
            )
        expectations = list(session.expectations)
        path, expected_path = session.save(tmp_path / "scripts")
        assert expected_path.is_file()
        script = load_script(path)
        fresh = SimulatedDevice(load_session(tmp_path / "sess"))
        report = replay_script(script, fresh, EngineConfig(), expectations)
        assert replay_accuracy(report) == 1.0
        assert session.steps == []  # session reset


class TestHeadlessRecord:
    def test_end_to_end_round_trip(self, device, tmp_path):
        app = recorder_app()
        walk = [
            WalkStep(OpKind.TEXT_INPUT, "field", payload="query"),
            WalkStep(OpKind.TAP, "open"),
            WalkStep(OpKind.TAP, "close"),
            WalkStep(OpKind.TAP, "row"),
        ]
        events = [
            RecordedEvent(
                OpKind(e["kind"]),
                RelPoint(e["x"], e["y"]) if "x" in e else None,
                RelPoint(e["x2"], e["y2"]) if "x2" in e else None,
                e.get("text", ""),
            )
            for e in events_for_walk(app, walk)
        ]
        script, expectations, review = record_events(device, events, EngineConfig())
        assert len(script.steps) == 4
        assert not any(review)
        fresh = SimulatedDevice(load_session(tmp_path / "sess"))
        report = replay_script(script, fresh, EngineConfig(), expectations)
        assert replay_accuracy(report) == 1.0


def http_get(url: str):
    with urllib.request.urlopen(url, timeout=10) as response:
        return response.status, response.read(), dict(response.headers)


def http_post(url: str, body: bytes, content_type: str):
    request = urllib.request.Request(url, data=body, headers={"Content-Type": content_type})
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


class TestHttpService:
    def test_full_session_over_http(self, device, tmp_path):
        service = RecorderService(device, EngineConfig(), save_root=tmp_path / "out")
        port = service.start(port=0)
        base = f"http://127.0.0.1:{port}"
        try:
            status, png, headers = http_get(f"{base}/screen")
            assert status == 200
            token = headers["X-Screenshot-Token"]
            assert token
            img = decode_png(png)
            assert (img.width, img.height) == (300, 600)

            status, layout_xml, _ = http_get(f"{base}/layout")
            assert status == 200
            assert ET.fromstring(layout_xml).tag == "layout"

            center = widget_center(recorder_app(), "home", "open")
            status, body = http_post(
                f"{base}/event",
                f'<event kind="tap" x="{center.x}" y="{center.y}" token="{token}"/>'.encode(),
                "application/xml",
            )
            assert status == 200
            recorded = ET.fromstring(body)
            assert recorded.find("step").get("op") == "tap"

            # stale token: the projection moved on after the tap
            status, body = http_post(
                f"{base}/event",
                f'<event kind="tap" x="0.2" y="0.8" token="{token}"/>'.encode(),
                "application/xml",
            )
            assert status == 409

            status, _, headers = http_get(f"{base}/screen")
            token2 = headers["X-Screenshot-Token"]
            assert token2 != token
            center2 = widget_center(recorder_app(), "detail", "close")
            status, _ = http_post(
                f"{base}/event",
                urllib.parse.urlencode(
                    {"kind": "tap", "x": center2.x, "y": center2.y, "token": token2}
                ).encode(),
                "application/x-www-form-urlencoded",
            )
            assert status == 200

            status, steps_xml, _ = http_get(f"{base}/steps")
            assert status == 200
            assert len(ET.fromstring(steps_xml).findall("step")) == 2

            status, body = http_post(f"{base}/save", b"<save/>", "application/xml")
            assert status == 200
            saved = ET.fromstring(body)
            script = load_script(saved.get("path"))
            assert len(script.steps) == 2

            # empty session: save again fails cleanly
            status, _ = http_post(f"{base}/save", b"<save/>", "application/xml")
            assert status == 400
        finally:
            service.stop()

    def test_port_conflict_rejected(self, device, tmp_path):
        service = RecorderService(device, save_root=tmp_path)
        port = service.start(port=0)
        other = RecorderService(device, save_root=tmp_path)
        try:
            with pytest.raises(OSError):
                other.start(port=port)
        finally:
            service.stop()
            other.stop() if other._server else None

    def test_root_serves_fallback_page(self, device, tmp_path):
        service = RecorderService(device, save_root=tmp_path)
        port = service.start(port=0)
        try:
            status, body, _ = http_get(f"http://127.0.0.1:{port}/")
            assert status == 200
            assert b"Recorder service" in body
        finally:
            service.stop()

    def test_unchanged_screen_keeps_token(self, device, tmp_path):
        service = RecorderService(device, save_root=tmp_path)
        port = service.start(port=0)
        try:
            _, _, h1 = http_get(f"http://127.0.0.1:{port}/screen")
            _, _, h2 = http_get(f"http://127.0.0.1:{port}/screen")
            assert h1["X-Screenshot-Token"] == h2["X-Screenshot-Token"]
        finally:
            service.stop()

    def test_stop_persists_no_partial_script(self, device, tmp_path):
        root = tmp_path / "saved"
        service = RecorderService(device, save_root=root)
        port = service.start(port=0)
        base = f"http://127.0.0.1:{port}"
        _, _, headers = http_get(f"{base}/screen")
        center = widget_center(recorder_app(), "home", "open")
        status, _ = http_post(
            f"{base}/event",
            f'<event kind="tap" x="{center.x}" y="{center.y}" '
            f'token="{headers["X-Screenshot-Token"]}"/>'.encode(),
            "application/xml",
        )
        assert status == 200
        service.stop()
        assert not root.exists()  # steps without a save never touch disk
        with pytest.raises(urllib.error.URLError):
            http_get(f"{base}/screen")
