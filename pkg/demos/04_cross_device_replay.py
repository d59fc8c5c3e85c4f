"""Replay a script recorded on one device on a different one.

The replay device renders the same app at another resolution and with some
widget contents changed, the situation where pure image matching breaks and
the layout arm carries the step.

Run:  python3 demos/04_cross_device_replay.py   (takes ~1 minute)
"""

import tempfile
from pathlib import Path

from uireplay.config import EngineConfig
from uireplay.device import SimulatedDevice, load_session
from uireplay.recorder import event_from_mapping, record_events
from uireplay.replay import replay_accuracy, replay_script
from uireplay.reporting import render_summary
from uireplay.synthetic import build_session, events_for_walk, make_flow_app, mutate_content

work = Path(tempfile.mkdtemp(prefix="uireplay_xdev_"))
app, walk = make_flow_app("shop", screens=3, seed=2026)

# Record on a 1080x2244 device; replay on 720x1544 where the field and menu
# widgets render with different content (think refreshed news items).
mutated = {"s0_field", "s1_menu", "s2_field"}
record_dir = build_session(app, (1080, 2244), work / "record_device")
replay_dir = build_session(mutate_content(app, mutated), (720, 1544), work / "replay_device")

device = SimulatedDevice(load_session(record_dir))
events = [event_from_mapping(e) for e in events_for_walk(app, walk)]
script, expectations, _ = record_events(device, events, EngineConfig())
print(f"recorded {len(script.steps)} steps at 1080x2244")

report = replay_script(
    script, SimulatedDevice(load_session(replay_dir)), EngineConfig(gamma=0.5), expectations
)
print(f"replayed at 720x1544 with mutated content: accuracy {replay_accuracy(report):.2f}\n")

print("per-step arms (I = feature arm right, L = layout arm right):")
for outcome, exp in zip(report.outcomes, expectations):
    arms = ("I" if outcome.image_ok else "-") + ("L" if outcome.layout_ok else "-")
    flag = " <- content mutated" if exp.widget_id in mutated else ""
    print(f"  step {outcome.index:2d} [{arms}] {'ok' if outcome.success else 'FAILED'}{flag}")

print()
print(render_summary([report]))
print("\non mutated widgets the feature arm loses its anchor and the layout")
print("arm alone still lands the gesture, which is the point of the fusion.")
