"""Command line interface: subcommand flows, exit codes, reproducibility."""

import xml.etree.ElementTree as ET

import pytest

from uireplay.cli import main
from uireplay.replay import report_from_xml
from uireplay.synthetic import build_session, events_for_walk, events_to_xml, make_flow_app


@pytest.fixture
def workspace(tmp_path):
    app, walk = make_flow_app("cliapp", screens=2, seed=51)
    session = build_session(app, (300, 600), tmp_path / "sess")
    events = tmp_path / "events.xml"
    events.write_bytes(events_to_xml(events_for_walk(app, walk)))
    return {"tmp": tmp_path, "session": session, "events": events, "app": app}


def record_args(ws, out="scripts", stamp="20260809T080000Z", expected="expected.xml"):
    return [
        "record",
        "--session", str(ws["session"]),
        "--events", str(ws["events"]),
        "--out", str(ws["tmp"] / out),
        "--expected", str(ws["tmp"] / expected),
        "--timestamp", stamp,
    ]


def script_dir(ws, out="scripts"):
    (entry,) = [p for p in (ws["tmp"] / out).iterdir() if p.is_dir()]
    return entry


class TestRecordReplay:
    def test_record_then_replay_exit_zero(self, workspace, capsys):
        assert main(record_args(workspace)) == 0
        report = workspace["tmp"] / "report.xml"
        code = main(
            [
                "replay",
                "--script", str(script_dir(workspace)),
                "--session", str(workspace["session"]),
                "--expected", str(workspace["tmp"] / "expected.xml"),
                "--report", str(report),
            ]
        )
        assert code == 0
        parsed = report_from_xml(report.read_bytes())
        assert parsed.accuracy == 1.0
        out = capsys.readouterr().out
        assert "config:" in out  # effective config echoed

    def test_replay_multiple_sessions_writes_one_report_each(self, workspace, tmp_path):
        assert main(record_args(workspace)) == 0
        other = build_session(workspace["app"], (360, 720), workspace["tmp"] / "sess2")
        report_dir = workspace["tmp"] / "reports"
        code = main(
            [
                "replay",
                "--script", str(script_dir(workspace)),
                "--session", str(workspace["session"]),
                "--session", str(other),
                "--expected", str(workspace["tmp"] / "expected.xml"),
                "--report", str(report_dir),
            ]
        )
        assert code == 0
        names = sorted(p.name for p in report_dir.iterdir())
        assert names == ["report_sess.xml", "report_sess2.xml"]

    def test_reproducible_runs(self, workspace):
        assert main(record_args(workspace, out="a")) == 0
        assert main(record_args(workspace, out="b")) == 0
        a, b = script_dir(workspace, "a"), script_dir(workspace, "b")
        assert (a / "manifest.xml").read_bytes() == (b / "manifest.xml").read_bytes()
        ra, rb = workspace["tmp"] / "ra.xml", workspace["tmp"] / "rb.xml"
        for script, out in ((a, ra), (b, rb)):
            assert main(
                [
                    "replay", "--script", str(script),
                    "--session", str(workspace["session"]),
                    "--expected", str(workspace["tmp"] / "expected.xml"),
                    "--report", str(out), "--seed", "0x5EED",
                ]
            ) == 0
        assert ra.read_bytes() == rb.read_bytes()


class TestSingleImageCommands:
    def test_characterize_writes_layout(self, workspace):
        screen = workspace["session"] / "s0.png"
        out = workspace["tmp"] / "layout.xml"
        assert main(["characterize", "--screen", str(screen), "--out", str(out)]) == 0
        root = ET.parse(out).getroot()
        assert root.tag == "layout"
        assert len(root.findall("widget")) >= 4

    def test_match_finds_recorded_widget(self, workspace):
        assert main(record_args(workspace)) == 0
        step0 = script_dir(workspace) / "000"
        out = workspace["tmp"] / "candidates.xml"
        code = main(
            [
                "match",
                "--widget", str(step0 / "widget.png"),
                "--screen", str(step0 / "activity.png"),
                "--out", str(out),
                "--delta", "0.5", "--seed", "7",
            ]
        )
        assert code == 0
        root = ET.parse(out).getroot()
        assert root.tag == "candidates"
        assert len(root.findall("candidate")) >= 1


class TestReportCommand:
    REPORT_A = (
        b'<report script="s" device="d0" accuracy="0.500000" steps="2">'
        b'<step index="0" success="true" image_ok="true" layout_ok="false" final_ok="true" note=""/>'
        b'<step index="1" success="false" image_ok="false" layout_ok="false" final_ok="false" note="miss"/>'
        b"</report>"
    )
    REPORT_B = (
        b'<report script="s" device="d1" accuracy="1.000000" steps="2">'
        b'<step index="0" success="true" image_ok="true" layout_ok="true" final_ok="true" note=""/>'
        b'<step index="1" success="true" image_ok="false" layout_ok="true" final_ok="true" note=""/>'
        b"</report>"
    )

    def test_merged_arithmetic(self, tmp_path, capsys):
        a = tmp_path / "a.xml"
        b = tmp_path / "b.xml"
        a.write_bytes(self.REPORT_A)
        b.write_bytes(self.REPORT_B)
        assert main(["report", "--in", str(a), str(b)]) == 0
        out = capsys.readouterr().out
        # 4 steps, 3 final successes; buckets: both=1, image_only=1, layout_only=1
        assert "both=1" in out
        assert "image_only=1" in out
        assert "layout_only=1" in out
        assert "neither=0" in out
        assert "75.0%" in out


class TestExitCodes:
    def test_gamma_out_of_range_is_usage_error(self, workspace):
        args = record_args(workspace) + ["--gamma", "1.5"]
        assert main(args) == 2

    def test_unknown_flag_is_usage_error(self, workspace):
        assert main(["record", "--frobnicate"]) == 2

    def test_missing_script_is_operation_failure(self, workspace):
        code = main(
            [
                "replay",
                "--script", str(workspace["tmp"] / "nope"),
                "--session", str(workspace["session"]),
                "--report", str(workspace["tmp"] / "r.xml"),
            ]
        )
        assert code == 1

    def test_existing_script_dir_is_operation_failure(self, workspace):
        assert main(record_args(workspace)) == 0
        assert main(record_args(workspace)) == 1  # same id, no silent overwrite

    def test_config_file_overrides(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "cfg.xml"
        cfg.write_bytes(b'<config delta="0.7" gamma="0.25"/>')
        screen = workspace["session"] / "s0.png"
        out = tmp_path / "layout.xml"
        assert main(
            ["characterize", "--config", str(cfg), "--screen", str(screen), "--out", str(out)]
        ) == 0
        echoed = capsys.readouterr().out
        assert "delta=0.7" in echoed and "gamma=0.25" in echoed

    def test_bad_config_value_is_usage_error(self, workspace, tmp_path):
        cfg = tmp_path / "cfg.xml"
        cfg.write_bytes(b'<config delta="1.7"/>')
        screen = workspace["session"] / "s0.png"
        assert main(
            ["characterize", "--config", str(cfg), "--screen", str(screen),
             "--out", str(tmp_path / "o.xml")]
        ) == 2
