"""Record a script on a synthetic device, inspect it on disk, replay it.

Run from the repository root:  python3 demos/01_record_and_replay.py
"""

import tempfile
from pathlib import Path

from uireplay.config import EngineConfig
from uireplay.device import SimulatedDevice, load_session
from uireplay.recorder import event_from_mapping, record_events
from uireplay.replay import replay_accuracy, replay_script
from uireplay.script import load_script, save_script
from uireplay.synthetic import build_session, events_for_walk, make_flow_app

work = Path(tempfile.mkdtemp(prefix="uireplay_demo_"))
print(f"working in {work}\n")

# A deterministic 3-screen app: header, card grid, text field, swipe list.
app, walk = make_flow_app("demoapp", screens=3, seed=7)
session_dir = build_session(app, (540, 1080), work / "session")
print(f"synthetic session: {sorted(p.name for p in session_dir.iterdir())}\n")

# Headless record: scripted events run through the same pipeline the
# interactive recorder uses (layout-derived widget boxes, screenshot crops).
device = SimulatedDevice(load_session(session_dir))
events = [event_from_mapping(e) for e in events_for_walk(app, walk)]
script, expectations, _ = record_events(device, events, EngineConfig())
print(f"recorded {len(script.steps)} steps:")
for i, step in enumerate(script.steps):
    box = step.widget_box
    print(
        f"  {i:2d} {step.op.kind.value:<10} widget=({box.top_left.x:.2f},{box.top_left.y:.2f})"
        f"-({box.bottom_right.x:.2f},{box.bottom_right.y:.2f}) text={step.text!r}"
    )

# Persist: one directory per step with both screenshots and the geometry XML.
script_dir = save_script(script, work / "scripts")
print(f"\nsaved to {script_dir}")
step0 = script_dir / "000"
print(f"step 000 files: {sorted(p.name for p in step0.iterdir())}")
print((step0 / "step.xml").read_text()[:160], "...\n")

# The round trip is lossless.
assert load_script(script_dir) == script
print("load(save(script)) == script\n")

# Replay on a fresh device: both matchers per step, fused dispatch.
replay_device = SimulatedDevice(load_session(session_dir))
report = replay_script(script, replay_device, EngineConfig(), expectations)
print(f"replay accuracy on the same session: {replay_accuracy(report):.2f}")
for outcome in report.outcomes:
    arms = ("I" if outcome.image_ok else "-") + ("L" if outcome.layout_ok else "-")
    print(f"  step {outcome.index:2d} [{arms}] {'ok' if outcome.success else 'FAILED'}")
