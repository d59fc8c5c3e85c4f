"""Command line entry point.

Subcommands: record (headless, scripted events), replay, characterize, match,
serve, report. Exit codes: 0 success, 1 operation failure, 2 usage or config
error. Every run prints the effective configuration so results can be
reproduced.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .config import EngineConfig, load_config
from .device import SimulatedDevice, load_session
from .features import locate_candidates
from .imaging import decode_png, to_grayscale
from .layout import characterize_screen, layout_to_xml
from .recorder import RecorderService, event_from_mapping, record_events
from .replay import load_expectations, replay_script, report_from_xml, report_to_xml
from .reporting import render_summary
from .script import load_script, save_script
from .synthetic import events_from_xml

import xml.etree.ElementTree as ET


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uireplay",
        description="Screenshot-driven GUI test record and replay",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="XML config file overriding defaults")
        p.add_argument("--delta", type=float, help="ratio test threshold")
        p.add_argument("--gamma", type=float, help="fusion weight")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="RANSAC seed")

    p = sub.add_parser("record", help="record a script from a scripted event file")
    add_common(p)
    p.add_argument("--session", required=True, help="simulated session directory")
    p.add_argument("--events", required=True, help="events XML file")
    p.add_argument("--out", required=True, help="directory to store the script in")
    p.add_argument("--expected", help="write the expectations sidecar here")
    p.add_argument("--timestamp", help="UTC timestamp YYYYMMDDThhmmssZ for the script id")

    p = sub.add_parser("replay", help="replay a script on one or more sessions")
    add_common(p)
    p.add_argument("--script", required=True, help="script directory")
    p.add_argument(
        "--session", required=True, action="append",
        help="simulated session directory (repeatable; runs in parallel)",
    )
    p.add_argument("--expected", help="expectations sidecar for scoring")
    p.add_argument(
        "--report", required=True,
        help="report file (single session) or directory (multiple sessions)",
    )

    p = sub.add_parser("characterize", help="layout-characterize one screenshot")
    add_common(p)
    p.add_argument("--screen", required=True, help="screenshot PNG")
    p.add_argument("--out", required=True, help="layout XML output")

    p = sub.add_parser("match", help="locate a widget crop inside a screenshot")
    add_common(p)
    p.add_argument("--widget", required=True, help="widget crop PNG")
    p.add_argument("--screen", required=True, help="screenshot PNG")
    p.add_argument("--out", required=True, help="candidates XML output")

    p = sub.add_parser("serve", help="run the interactive recorder service")
    add_common(p)
    p.add_argument("--session", required=True, help="simulated session directory")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--root", default=".", help="where saved scripts land")
    p.add_argument("--assets", help="frontend asset directory (frontend/dist)")

    p = sub.add_parser("report", help="merge replay reports into an accuracy table")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="report XML files")

    return parser


def _effective_config(args) -> EngineConfig:
    cfg = EngineConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {}
    for name in ("delta", "gamma", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    print(f"config: {cfg.describe()}")
    return cfg


def _parse_timestamp(raw: str | None) -> datetime | None:
    if raw is None:
        return None
    try:
        return datetime.strptime(raw, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise UsageError(f"bad --timestamp {raw!r}: expected YYYYMMDDThhmmssZ") from exc


def _cmd_record(args, cfg: EngineConfig) -> int:
    when = _parse_timestamp(args.timestamp)
    device = SimulatedDevice(load_session(args.session))
    events = [event_from_mapping(ev) for ev in events_from_xml(Path(args.events).read_bytes())]
    script, expectations, review = record_events(device, events, cfg, when)
    path = save_script(script, args.out)
    if args.expected:
        from .replay import expectations_to_xml

        Path(args.expected).write_bytes(expectations_to_xml(script.id, expectations))
    flagged = sum(review)
    print(f"recorded {len(script.steps)} steps -> {path}" + (f" ({flagged} flagged for review)" if flagged else ""))
    return 0


def _cmd_replay(args, cfg: EngineConfig) -> int:
    script = load_script(args.script)
    expectations = load_expectations(args.expected) if args.expected else None
    sessions = args.session
    report_arg = Path(args.report)

    def run_one(session_dir: str):
        device = SimulatedDevice(load_session(session_dir))
        report = replay_script(script, device, cfg, expectations)
        if len(sessions) == 1 and not report_arg.is_dir():
            out = report_arg
        else:
            report_arg.mkdir(parents=True, exist_ok=True)
            out = report_arg / f"report_{Path(session_dir).name}.xml"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(report_to_xml(report))
        return out, report

    if len(sessions) == 1:
        results = [run_one(sessions[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(sessions)) as pool:
            results = list(pool.map(run_one, sessions))
    for out, report in results:
        print(f"replayed {len(report.outcomes)} steps @ {report.device_id}: "
              f"accuracy {report.accuracy:.4f} -> {out}")
    return 0


def _cmd_characterize(args, cfg: EngineConfig) -> int:
    screen = to_grayscale(decode_png(Path(args.screen).read_bytes()))
    layout = characterize_screen(screen, cfg)
    Path(args.out).write_bytes(layout_to_xml(layout))
    print(f"characterized {len(layout)} widgets -> {args.out}")
    return 0


def _cmd_match(args, cfg: EngineConfig) -> int:
    widget = to_grayscale(decode_png(Path(args.widget).read_bytes()))
    screen = to_grayscale(decode_png(Path(args.screen).read_bytes()))
    candidates = locate_candidates(widget, screen, cfg)
    root = ET.Element("candidates", widget=args.widget, screen=args.screen)
    for c in candidates:
        ET.SubElement(
            root, "candidate",
            x0=str(c.box.x0), y0=str(c.box.y0), x1=str(c.box.x1), y1=str(c.box.y1),
            score=f"{c.score:.6f}", support=str(c.support),
        )
    Path(args.out).write_bytes(ET.tostring(root, encoding="utf-8"))
    print(f"{len(candidates)} candidates -> {args.out}")
    return 0


def _cmd_serve(args, cfg: EngineConfig) -> int:
    device = SimulatedDevice(load_session(args.session))
    service = RecorderService(device, cfg, save_root=args.root, assets_dir=args.assets)
    port = service.start(port=args.port)
    print(f"recorder service on http://127.0.0.1:{port}/ (Ctrl-C to stop)")
    try:
        service._thread.join()
    except KeyboardInterrupt:
        service.stop()
    return 0


def _cmd_report(args) -> int:
    reports = [report_from_xml(Path(p).read_bytes()) for p in args.inputs]
    print(render_summary(reports))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2

    if args.command == "report":
        try:
            return _cmd_report(args)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    try:
        cfg = _effective_config(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    handler = {
        "record": _cmd_record,
        "replay": _cmd_replay,
        "characterize": _cmd_characterize,
        "match": _cmd_match,
        "serve": _cmd_serve,
    }[args.command]
    try:
        return handler(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
