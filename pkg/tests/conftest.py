"""Shared fixtures: deterministic images, paste transforms, session builders."""

from __future__ import annotations

import math

import cv2
import numpy as np
import pytest

from uireplay.geometry import PixelBox
from uireplay.imaging import GrayImage, RasterImage


def gray_from_array(a: np.ndarray) -> GrayImage:
    return GrayImage(np.asarray(a, dtype=np.uint8))


def rgba_from_rgb(rgb: np.ndarray) -> RasterImage:
    h, w = rgb.shape[:2]
    alpha = np.full((h, w, 1), 255, dtype=np.uint8)
    return RasterImage(np.concatenate([rgb.astype(np.uint8), alpha], axis=2))


def flat_rgba(width: int, height: int, rgb=(255, 255, 255)) -> RasterImage:
    a = np.zeros((height, width, 4), dtype=np.uint8)
    a[:, :, 0], a[:, :, 1], a[:, :, 2] = rgb
    a[:, :, 3] = 255
    return RasterImage(a)


def textured_gray(width: int, height: int, seed: int, blobs: int = 30) -> GrayImage:
    """A feature-rich grayscale patch: random dark blocks on a light face."""
    rng = np.random.default_rng(seed)
    a = np.full((height, width), 246, dtype=np.uint8)
    a[:2, :] = 25
    a[-2:, :] = 25
    a[:, :2] = 25
    a[:, -2:] = 25
    for _ in range(blobs):
        x = rng.integers(3, max(4, width - 10))
        y = rng.integers(3, max(4, height - 10))
        bw = int(rng.integers(4, max(5, width // 4)))
        bh = int(rng.integers(4, max(5, height // 4)))
        a[y : min(height - 3, y + bh), x : min(width - 3, x + bw)] = rng.integers(0, 200)
    return GrayImage(a)


def paste_patch(
    screen: np.ndarray,
    patch: np.ndarray,
    center: tuple[float, float],
    scale: float = 1.0,
    angle_deg: float = 0.0,
) -> np.ndarray:
    """Composite `patch` into `screen` rotated/scaled about the patch center."""
    out = screen.copy()
    h, w = patch.shape[:2]
    m = cv2.getRotationMatrix2D((w / 2.0, h / 2.0), angle_deg, scale)
    m[0, 2] += center[0] - w / 2.0
    m[1, 2] += center[1] - h / 2.0
    size = (screen.shape[1], screen.shape[0])
    # BORDER_CONSTANT writes every output pixel (BORDER_TRANSPARENT leaves
    # uninitialized memory outside the patch, which is not reproducible).
    warped = cv2.warpAffine(
        patch, m, size, flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    mask = cv2.warpAffine(
        np.full((h, w), 255, dtype=np.uint8), m, size,
        flags=cv2.INTER_NEAREST, borderValue=0,
    )
    mask = cv2.erode(mask, np.ones((3, 3), dtype=np.uint8))  # skip the blended rim
    out[mask > 0] = warped[mask > 0]
    return out


def exact_paste(screen: np.ndarray, patch: np.ndarray, x: int, y: int) -> np.ndarray:
    out = screen.copy()
    h, w = patch.shape[:2]
    out[y : y + h, x : x + w] = patch
    return out


def box_grid(
    rows: int, cols: int, box_w: int, box_h: int, gap_x: int, gap_y: int,
    origin: tuple[int, int] = (20, 20),
) -> list[PixelBox]:
    """Inclusive pixel boxes laid out in a regular grid, row-major."""
    ox, oy = origin
    boxes = []
    for r in range(rows):
        for c in range(cols):
            x0 = ox + c * (box_w + gap_x)
            y0 = oy + r * (box_h + gap_y)
            boxes.append(PixelBox(x0, y0, x0 + box_w - 1, y0 + box_h - 1))
    return boxes


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
