"""Engine configuration: every calibration knob with its default in one place."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class EngineConfig:
    """Tuning knobs for matching, layout characterization and replay fusion.

    gamma blends the image-arm and layout-arm target points (1.0 = image only),
    delta is the descriptor ratio-test threshold.
    """

    delta: float = 0.5
    gamma: float = 0.5
    seed: int = 0x5EED
    canny_low: float = 50.0
    canny_high: float = 150.0
    canny_sigma: float = 1.4
    dilation_radius: int = 2
    group_gap_frac: float = 0.05  # of screen height
    line_overlap_frac: float = 0.5  # of the smaller box height
    text_similarity: float = 0.8
    min_dim_frac: float = 0.02  # of screen width (noise rule)
    nested_keep_frac: float = 0.60  # of screen width (inner-contour exception)
    min_area_frac: float = 0.01  # of screenshot area
    top_crop_px: int = 0
    ransac_iters: int = 2000
    ransac_confidence: float = 0.99
    ransac_inlier_px: float = 3.0
    max_steps: int | None = None

    def validate(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not (0.0 <= self.canny_low <= self.canny_high <= 255.0):
            raise ValueError(
                f"canny thresholds need 0 <= low <= high <= 255, got "
                f"{self.canny_low}/{self.canny_high}"
            )
        if self.canny_sigma <= 0:
            raise ValueError(f"canny_sigma must be positive, got {self.canny_sigma}")
        if self.dilation_radius < 0:
            raise ValueError(f"dilation_radius must be >= 0, got {self.dilation_radius}")
        for name in ("group_gap_frac", "line_overlap_frac", "text_similarity",
                     "min_dim_frac", "nested_keep_frac", "min_area_frac"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.top_crop_px < 0:
            raise ValueError(f"top_crop_px must be >= 0, got {self.top_crop_px}")
        if self.ransac_iters < 1:
            raise ValueError(f"ransac_iters must be >= 1, got {self.ransac_iters}")
        if not (0.0 < self.ransac_confidence < 1.0):
            raise ValueError(
                f"ransac_confidence must be in (0, 1), got {self.ransac_confidence}"
            )
        if self.ransac_inlier_px <= 0:
            raise ValueError(f"ransac_inlier_px must be > 0, got {self.ransac_inlier_px}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        return self

    def describe(self) -> str:
        """One reproducibility line with every effective value."""
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(f"{f.name}={v:#x}" if f.name == "seed" else f"{f.name}={v}")
        return " ".join(parts)

    def to_xml(self) -> bytes:
        el = ET.Element("config")
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                el.set(f.name, str(v))
        return ET.tostring(el, encoding="utf-8")


def load_config(path: str | Path, base: EngineConfig | None = None) -> EngineConfig:
    """Read a `<config .../>` XML file, overlaying attributes onto `base`."""
    cfg = base or EngineConfig()
    root = ET.parse(Path(path)).getroot()
    if root.tag != "config":
        raise ValueError(f"expected <config> root, got <{root.tag}>")
    casts = {f.name: f for f in fields(EngineConfig)}
    overrides = {}
    for name, raw in root.attrib.items():
        if name not in casts:
            raise ValueError(f"unknown config attribute {name!r}")
        if name in ("dilation_radius", "seed", "ransac_iters", "top_crop_px", "max_steps"):
            overrides[name] = int(raw, 0)
        else:
            overrides[name] = float(raw)
    return replace(cfg, **overrides).validate()
