"""Coordinate primitives shared by the script model, imaging and matching code.

Relative coordinates are fractions of the screen resolution in [0, 1], which is
what makes recorded scripts replayable across devices with different pixel
grids. Pixel boxes are plain ordered integer quads; whether the bottom-right
corner is inclusive (imaging, layout, regions) or exclusive (recorded widget
boxes) is documented on each operation that consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RelPoint:
    """A point as fractions of screen width/height, both in [0, 1]."""

    x: float
    y: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"relative point out of range: ({self.x}, {self.y})")

    def to_pixels(self, resolution: tuple[int, int]) -> tuple[float, float]:
        w, h = resolution
        return self.x * w, self.y * h

    def distance(self, other: "RelPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class RelBox:
    """An axis-aligned box in relative coordinates."""

    top_left: RelPoint
    bottom_right: RelPoint

    def __post_init__(self):
        if self.top_left.x > self.bottom_right.x or self.top_left.y > self.bottom_right.y:
            raise ValueError("relative box corners out of order")

    def contains(self, p: RelPoint) -> bool:
        return (
            self.top_left.x <= p.x <= self.bottom_right.x
            and self.top_left.y <= p.y <= self.bottom_right.y
        )

    @property
    def center(self) -> RelPoint:
        return RelPoint(
            (self.top_left.x + self.bottom_right.x) / 2.0,
            (self.top_left.y + self.bottom_right.y) / 2.0,
        )

    def to_pixels(self, resolution: tuple[int, int]) -> tuple[float, float, float, float]:
        w, h = resolution
        return (
            self.top_left.x * w,
            self.top_left.y * h,
            self.bottom_right.x * w,
            self.bottom_right.y * h,
        )


@dataclass(frozen=True)
class PixelBox:
    """An axis-aligned box in integer pixel coordinates, origin top-left."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"negative pixel box corner: {self}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"pixel box corners out of order: {self}")

    # Inclusive-corner dimensions: the box (x, y, x, y) is one pixel.
    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        # Continuous center: the inclusive box spans [x0, x1 + 1).
        return (self.x0 + self.x1 + 1) / 2.0, (self.y0 + self.y1 + 1) / 2.0

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 + 1 and self.y0 <= y < self.y1 + 1

    def contains_box(self, other: "PixelBox") -> bool:
        """True when `other` lies fully inside self (not necessarily strictly)."""
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def within_bounds(self, width: int, height: int) -> bool:
        return self.x1 < width and self.y1 < height
