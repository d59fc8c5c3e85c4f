"""Screenshot-driven, platform-independent GUI test record and replay.

Scripts store screenshots, relative widget geometry and text instead of
platform identifiers. Replay relocates each recorded widget by fusing
feature-based image matching with a group/line/column layout characterization
of the screen, then dispatches the recorded gesture at the fused point.
"""

from .config import EngineConfig, load_config
from .device import (
    AdbDriver,
    DeviceBackend,
    HitResult,
    Region,
    SimulatedDevice,
    SimulatedSession,
    WdaDriver,
    load_session,
)
from .features import (
    CandidateBox,
    FeatureSet,
    Homography,
    Keypoint,
    MatchPair,
    estimate_homography,
    extract_features,
    knn_match,
    locate_candidates,
    ratio_filter,
)
from .geometry import PixelBox, RelBox, RelPoint
from .imaging import (
    EdgeMap,
    GrayImage,
    RasterImage,
    canny,
    crop,
    decode_png,
    dilate,
    encode_png,
    find_contours,
    to_grayscale,
)
from .layout import (
    LayoutEntry,
    LayoutMap,
    SidecarOcr,
    TextRegion,
    characterize,
    characterize_screen,
    extract_widget_boxes,
    locate_by_tuple,
    tuple_of_point,
)
from .recorder import RecorderService, RecordingSession, record_events
from .replay import (
    ReplayReport,
    StepExpectation,
    StepOutcome,
    replay_accuracy,
    replay_script,
    resolve_target,
)
from .reporting import ReportSummary, render_summary, summarize
from .script import (
    DeviceMeta,
    Operation,
    OperationStep,
    OpKind,
    Script,
    load_script,
    make_step,
    save_script,
    validate_script,
)

__version__ = "0.1.0"
