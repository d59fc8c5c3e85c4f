"""Raster primitives: PNG codec, grayscale, crop, Canny, dilation, contours.

Everything here is pure: the same input bytes produce the same output bytes on
every run. Images are immutable once constructed (the backing numpy arrays are
write-locked).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .geometry import PixelBox

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ImagingError(ValueError):
    """Raised for malformed image data or out-of-range raster arguments."""


def _lock(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RasterImage:
    """RGBA raster, 8 bits per channel, shape (height, width, 4)."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 4 or p.dtype != np.uint8:
            raise ImagingError(f"expected (h, w, 4) uint8 pixels, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ImagingError("empty image")
        object.__setattr__(self, "pixels", _lock(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit luminance raster, shape (height, width)."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.uint8:
            raise ImagingError(f"expected (h, w) uint8 pixels, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ImagingError("empty image")
        object.__setattr__(self, "pixels", _lock(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class EdgeMap:
    """Binary edge mask with the dimensions of its source image."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.bool_:
            raise ImagingError(f"expected (h, w) bool mask, got {p.shape} {p.dtype}")
        object.__setattr__(self, "pixels", _lock(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def decode_png(data: bytes) -> RasterImage:
    """Decode a PNG byte stream into an RGBA raster."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgba = im.convert("RGBA")
            return RasterImage(np.asarray(rgba, dtype=np.uint8).copy())
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImagingError(f"malformed PNG stream: {exc}") from exc


def encode_png(img: RasterImage) -> bytes:
    """Encode an RGBA raster as PNG. decode_png(encode_png(img)) == img."""
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def to_grayscale(img: RasterImage) -> GrayImage:
    """Project RGBA to luminance: round(0.299 R + 0.587 G + 0.114 B), alpha ignored."""
    rgb = img.pixels[:, :, :3].astype(np.float64)
    lum = rgb[:, :, 0] * GRAY_WEIGHTS[0] + rgb[:, :, 1] * GRAY_WEIGHTS[1] + rgb[:, :, 2] * GRAY_WEIGHTS[2]
    return GrayImage(np.floor(lum + 0.5).astype(np.uint8))


def crop(img: RasterImage | GrayImage, box: PixelBox):
    """Copy the inclusive pixel box out of the image (output is width x1-x0+1 etc.)."""
    if not box.within_bounds(img.width, img.height):
        raise ImagingError(
            f"crop box {box} outside {img.width}x{img.height} image bounds"
        )
    sub = img.pixels[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1].copy()
    return type(img)(sub)


def _gaussian_kernel(sigma: float, size: int = 5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def canny(img: GrayImage, low: float = 50.0, high: float = 150.0, sigma: float = 1.4) -> EdgeMap:
    """Classic Canny edge detection.

    Pipeline: 5x5 Gaussian smoothing (configurable sigma), Sobel gradients,
    4-sector non-maximum suppression, then double-threshold hysteresis where
    weak pixels (magnitude > low) survive only when 8-connected to a strong
    pixel (magnitude > high). Every output pixel has Sobel magnitude > low on
    the smoothed image.
    """
    if not (0.0 <= low <= high <= 255.0):
        raise ImagingError(f"bad canny thresholds low={low} high={high}")
    f = img.pixels.astype(np.float64)
    smooth = ndimage.convolve(f, _gaussian_kernel(sigma), mode="mirror")
    gx = ndimage.convolve(smooth, SOBEL_X, mode="mirror")
    gy = ndimage.convolve(smooth, SOBEL_Y, mode="mirror")
    mag = np.hypot(gx, gy)

    # Non-maximum suppression along the quantized gradient direction.
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    s0 = (angle < 22.5) | (angle >= 157.5)  # horizontal gradient
    s45 = (angle >= 22.5) & (angle < 67.5)
    s90 = (angle >= 67.5) & (angle < 112.5)  # vertical gradient
    s135 = (angle >= 112.5) & (angle < 157.5)

    h, w = mag.shape
    pm = np.pad(mag, 1, mode="constant")

    def shifted(dy: int, dx: int) -> np.ndarray:
        return pm[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    fwd = np.select([s0, s45, s90, s135], [shifted(0, 1), shifted(1, 1), shifted(1, 0), shifted(1, -1)])
    bwd = np.select([s0, s45, s90, s135], [shifted(0, -1), shifted(-1, -1), shifted(-1, 0), shifted(-1, 1)])
    ridge = (mag >= fwd) & (mag >= bwd) & (mag > 0)

    weak = ridge & (mag > low)
    strong = ridge & (mag > high)
    if not strong.any():
        return EdgeMap(np.zeros_like(weak))
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.uint8))
    keep = np.unique(labels[strong])
    keep = keep[keep > 0]
    return EdgeMap(np.isin(labels, keep))


def dilate(edges: EdgeMap, radius: int) -> EdgeMap:
    """Morphological dilation with a (2*radius+1)-square element; radius 0 is identity."""
    if radius < 0:
        raise ImagingError(f"negative dilation radius {radius}")
    if radius == 0:
        return edges
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
    out = cv2.dilate(edges.pixels.astype(np.uint8), kernel)
    return EdgeMap(out.astype(bool))


@dataclass(frozen=True)
class Contour:
    """Bounding box of one 8-connected edge component plus its nesting parent."""

    box: PixelBox
    parent: int | None  # index into the list returned by find_contours


def find_contours(edges: EdgeMap) -> list[Contour]:
    """Bounding boxes of 8-connected edge components with nesting retained.

    A contour's parent is the smallest-area box that strictly contains it;
    equal boxes do not nest, so the parent relation is a forest.
    """
    mask = edges.pixels.astype(np.uint8)
    if not mask.any():
        return []
    n, _, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
    boxes = []
    for label in range(1, n):
        x, y, w, h = (
            int(stats[label, cv2.CC_STAT_LEFT]),
            int(stats[label, cv2.CC_STAT_TOP]),
            int(stats[label, cv2.CC_STAT_WIDTH]),
            int(stats[label, cv2.CC_STAT_HEIGHT]),
        )
        boxes.append(PixelBox(x, y, x + w - 1, y + h - 1))
    boxes.sort(key=lambda b: (b.y0, b.x0, b.y1, b.x1))

    contours = []
    for i, box in enumerate(boxes):
        parent = None
        parent_area = None
        for j, other in enumerate(boxes):
            if j == i or other == box:
                continue
            if other.contains_box(box) and (parent_area is None or other.area < parent_area):
                parent = j
                parent_area = other.area
        contours.append(Contour(box=box, parent=parent))
    return contours
