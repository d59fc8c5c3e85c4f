"""Build the 3-screen fixture session the frontend e2e test clicks through."""

import sys

from uireplay.script import OpKind
from uireplay.synthetic import AppSpec, ScreenSpec, WidgetSpec, build_session

home = ScreenSpec(
    name="home",
    widgets=(
        WidgetSpec("w_open", 0.20, 0.15, 0.60, 0.20, target="detail",
                   texture_seed=71, label="Open"),
        WidgetSpec("w_other", 0.20, 0.60, 0.60, 0.20, texture_seed=72),
    ),
)
detail = ScreenSpec(
    name="detail",
    widgets=(
        WidgetSpec("w_next", 0.20, 0.40, 0.60, 0.20, target="done", texture_seed=73),
    ),
)
done = ScreenSpec(
    name="done",
    widgets=(
        WidgetSpec("w_done", 0.20, 0.70, 0.60, 0.20, texture_seed=74),
        WidgetSpec("w_field", 0.20, 0.20, 0.60, 0.15, op=OpKind.TEXT_INPUT,
                   texture_seed=75),
    ),
)
app = AppSpec(name="uiapp", initial="home", screens=(home, detail, done))
build_session(app, (300, 600), sys.argv[1])
print("session ready")
