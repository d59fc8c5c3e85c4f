"""Widget localization by local image features.

Finds a recorded widget crop inside a replay screenshot: SIFT keypoints and
descriptors on both images, 2-nearest-neighbor descriptor matching through a
KD-tree, Lowe ratio filtering, spatial clustering of the surviving matches,
and a RANSAC homography per cluster to recover translation, scale and
rotation. Output is a ranked set of candidate boxes; an empty set is a valid
result (blank crop, too few features, nothing survives the ratio test).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy.spatial import cKDTree

from .config import EngineConfig
from .geometry import PixelBox
from .imaging import GrayImage

MIN_FEATURE_IMAGE_SIDE = 16
DESCRIPTOR_DIM = 128
MIN_CLUSTER_MATCHES = 4  # homography needs 4 correspondences


@dataclass(frozen=True)
class Keypoint:
    """Sub-pixel feature location with its detection scale and orientation."""

    x: float
    y: float
    scale: float
    orientation: float  # radians

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"keypoint scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class FeatureSet:
    """Keypoints plus one L2-normalized 128-d descriptor per keypoint."""

    keypoints: tuple[Keypoint, ...]
    descriptors: np.ndarray = field(repr=False)  # (n, 128) float64, unit rows

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        d = self.descriptors
        if d.ndim != 2 or d.shape[1] != DESCRIPTOR_DIM:
            raise ValueError(f"descriptors must be (n, {DESCRIPTOR_DIM}), got {d.shape}")
        if d.shape[0] != len(self.keypoints):
            raise ValueError(
                f"{len(self.keypoints)} keypoints but {d.shape[0]} descriptors"
            )
        d = np.ascontiguousarray(d, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "descriptors", d)

    def __len__(self) -> int:
        return len(self.keypoints)


def empty_feature_set() -> FeatureSet:
    return FeatureSet((), np.empty((0, DESCRIPTOR_DIM), dtype=np.float64))


@dataclass(frozen=True)
class MatchPair:
    """One target descriptor against its two nearest source descriptors."""

    target_index: int
    source_index: int
    d_min: float
    d_second_min: float

    def __post_init__(self):
        if self.d_min < 0 or self.d_second_min < 0:
            raise ValueError("descriptor distances cannot be negative")
        if self.d_min > self.d_second_min + 1e-12:
            raise ValueError(
                f"d_min {self.d_min} exceeds d_second_min {self.d_second_min}"
            )


@dataclass(frozen=True)
class Homography:
    """3x3 projective transform, normalized so the bottom-right entry is 1."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) < 1e-12:
            raise ValueError("homography cannot be normalized (H[2,2] ~ 0)")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-9:
            raise ValueError("homography is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        hom = np.hstack([pts, ones]) @ self.matrix.T
        return hom[:, :2] / hom[:, 2:3]


@dataclass(frozen=True)
class CandidateBox:
    """A suspected widget location with its match score and inlier support."""

    box: PixelBox
    score: float
    support: int

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.support < 0:
            raise ValueError(f"support must be >= 0, got {self.support}")


def extract_features(img: GrayImage) -> FeatureSet:
    """SIFT keypoints and descriptors, in deterministic (y, x, scale) order.

    Images smaller than 16x16 yield an empty set, the downstream signal for
    "too few feature points".
    """
    if img.width < MIN_FEATURE_IMAGE_SIDE or img.height < MIN_FEATURE_IMAGE_SIDE:
        return empty_feature_set()
    sift = cv2.SIFT_create()
    raw_kps, raw_desc = sift.detectAndCompute(img.pixels, None)
    if not raw_kps:
        return empty_feature_set()

    order = sorted(
        range(len(raw_kps)),
        key=lambda i: (raw_kps[i].pt[1], raw_kps[i].pt[0], raw_kps[i].size, raw_kps[i].angle),
    )
    keypoints = []
    for i in order:
        kp = raw_kps[i]
        keypoints.append(
            Keypoint(
                x=float(kp.pt[0]),
                y=float(kp.pt[1]),
                scale=float(kp.size),
                orientation=math.radians(float(kp.angle)),
            )
        )
    desc = raw_desc[order].astype(np.float64)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return FeatureSet(tuple(keypoints), desc / norms)


def knn_match(target: FeatureSet, source: FeatureSet, k: int = 2) -> list[MatchPair]:
    """Two nearest source descriptors for every target descriptor (exact search).

    Returns an empty list when the source has fewer than two descriptors.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if len(source) < 2 or len(target) == 0:
        return []
    tree = cKDTree(source.descriptors)
    dists, idxs = tree.query(target.descriptors, k=2)
    return [
        MatchPair(
            target_index=i,
            source_index=int(idxs[i, 0]),
            d_min=float(dists[i, 0]),
            d_second_min=float(dists[i, 1]),
        )
        for i in range(len(target))
    ]


def ratio_filter(pairs: list[MatchPair], delta: float) -> list[MatchPair]:
    """Keep pairs whose nearest/second-nearest distance ratio is below delta.

    Pairs with d_second_min == 0 are exact duplicates in the source and are
    kept: a zero-over-zero ratio is defined as a perfect match.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    kept = []
    for p in pairs:
        if p.d_second_min == 0.0 or p.d_min / p.d_second_min < delta:
            kept.append(p)
    return kept


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hartley normalization: centroid at origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    shifted = pts - centroid
    mean_dist = np.mean(np.linalg.norm(shifted, axis=1))
    scale = math.sqrt(2.0) / mean_dist if mean_dist > 1e-12 else 1.0
    t = np.array(
        [[scale, 0, -scale * centroid[0]], [0, scale, -scale * centroid[1]], [0, 0, 1]],
        dtype=np.float64,
    )
    return shifted * scale, t


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Direct linear transform on normalized correspondences; None if degenerate."""
    n = src.shape[0]
    src_n, t_src = _normalize_points(src)
    dst_n, t_dst = _normalize_points(dst)
    a = np.zeros((2 * n, 9), dtype=np.float64)
    for i in range(n):
        x, y = src_n[i]
        u, v = dst_n[i]
        a[2 * i] = [-x, -y, -1, 0, 0, 0, u * x, u * y, u]
        a[2 * i + 1] = [0, 0, 0, -x, -y, -1, v * x, v * y, v]
    try:
        _, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError:
        return None
    if s[-2] < 1e-10:  # rank deficient: collinear or repeated points
        return None
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    if abs(h[2, 2]) < 1e-12:
        return None
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) <= 1e-9:
        return None
    return h


def _reprojection_errors(h: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    ones = np.ones((src.shape[0], 1))
    proj = np.hstack([src, ones]) @ h.T
    w = proj[:, 2:3]
    bad = np.abs(w[:, 0]) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        xy = proj[:, :2] / w
    errs = np.linalg.norm(xy - dst, axis=1)
    errs[bad] = np.inf
    return errs


def estimate_homography(
    matches: list[MatchPair],
    k_target: FeatureSet,
    k_source: FeatureSet,
    *,
    seed: int = 0x5EED,
    max_iters: int = 2000,
    inlier_px: float = 3.0,
    confidence: float = 0.99,
) -> tuple[Homography, list[int]] | None:
    """RANSAC homography from target to source keypoints.

    Samples 4-point DLT solutions, counts inliers by reprojection error below
    `inlier_px`, exits early at `confidence`, then refits on all inliers with
    a normalized DLT. Deterministic for a fixed seed. Returns None when fewer
    than 4 matches or 4 inliers exist.
    """
    if len(matches) < 4:
        return None
    src = np.array(
        [(k_target.keypoints[m.target_index].x, k_target.keypoints[m.target_index].y) for m in matches]
    )
    dst = np.array(
        [(k_source.keypoints[m.source_index].x, k_source.keypoints[m.source_index].y) for m in matches]
    )
    n = len(matches)
    rng = np.random.default_rng(seed)

    best_h: np.ndarray | None = None
    best_inliers: np.ndarray | None = None
    best_count = 0
    needed = max_iters
    i = 0
    while i < min(needed, max_iters):
        i += 1
        sample = rng.choice(n, size=4, replace=False)
        h = _dlt(src[sample], dst[sample])
        if h is None:
            continue
        inl = _reprojection_errors(h, src, dst) < inlier_px
        count = int(inl.sum())
        if count > best_count:
            best_count = count
            best_inliers = inl
            best_h = h
            w = count / n
            if w >= 1.0:
                break
            denom = math.log(1.0 - w**4) if w > 0 else 0.0
            if denom < 0:
                needed = math.ceil(math.log(1.0 - confidence) / denom)
    if best_inliers is None or best_count < 4:
        return None

    final_h = best_h
    refit = _dlt(src[best_inliers], dst[best_inliers])
    if refit is not None:
        final_mask = _reprojection_errors(refit, src, dst) < inlier_px
        if final_mask.sum() >= 4:
            final_h = refit
            best_inliers = final_mask
    try:
        hom = Homography(final_h)
    except ValueError:
        return None
    return hom, [int(j) for j in np.flatnonzero(best_inliers)]


def _is_convex_quad(quad: np.ndarray) -> bool:
    crosses = []
    for i in range(4):
        a = quad[(i + 1) % 4] - quad[i]
        b = quad[(i + 2) % 4] - quad[(i + 1) % 4]
        crosses.append(a[0] * b[1] - a[1] * b[0])
    crosses = np.array(crosses)
    return bool(np.all(crosses > 0) or np.all(crosses < 0))


def _zero_distance_sources(desc: np.ndarray, source: FeatureSet) -> list[int]:
    diffs = source.descriptors - desc[None, :]
    d2 = np.einsum("ij,ij->i", diffs, diffs)
    return [int(j) for j in np.flatnonzero(d2 == 0.0)]


def _cluster_by_grid(
    points: list[tuple[float, float]], cell: float
) -> list[list[int]]:
    """Group point indices into clusters of 8-adjacent occupied grid cells."""
    cells: dict[tuple[int, int], list[int]] = {}
    for i, (x, y) in enumerate(points):
        key = (int(y // cell), int(x // cell))
        cells.setdefault(key, []).append(i)

    parent: dict[tuple[int, int], tuple[int, int]] = {k: k for k in cells}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for cy, cx in list(cells):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                nb = (cy + dy, cx + dx)
                if nb in cells:
                    ra, rb = find((cy, cx)), find(nb)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)

    groups: dict[tuple[int, int], list[int]] = {}
    for key, members in cells.items():
        groups.setdefault(find(key), []).extend(members)
    return [sorted(groups[root]) for root in sorted(groups)]


def locate_candidates(
    widget_img: GrayImage,
    screen_img: GrayImage,
    config: EngineConfig | None = None,
    *,
    target_features: FeatureSet | None = None,
    source_features: FeatureSet | None = None,
) -> list[CandidateBox]:
    """Full feature-matching pipeline from a widget crop to ranked screen boxes.

    Surviving ratio-test matches are clustered on the screen with grid cells
    the size of the widget diagonal (adjacent occupied cells merge). Each
    cluster of 4+ matches yields either a homography-projected box scored by
    inliers/matches, or, when the homography fails, a centroid-centered box at
    the recorded widget size with score 0.5. Pairs whose second-nearest
    distance is exactly zero spread over every zero-distance source keypoint,
    so identical repeated widgets each collect their own cluster.
    """
    cfg = config or EngineConfig()
    target = target_features if target_features is not None else extract_features(widget_img)
    source = source_features if source_features is not None else extract_features(screen_img)
    if len(target) == 0 or len(source) < 2:
        return []
    pairs = ratio_filter(knn_match(target, source), cfg.delta)
    if not pairs:
        return []

    entries: set[tuple[int, int]] = set()
    for p in pairs:
        if p.d_second_min == 0.0:
            for j in _zero_distance_sources(target.descriptors[p.target_index], source):
                entries.add((p.target_index, j))
        else:
            entries.add((p.target_index, p.source_index))
    entry_list = sorted(entries)

    cell = max(math.hypot(widget_img.width, widget_img.height), 1.0)
    points = [
        (source.keypoints[s].x, source.keypoints[s].y) for (_, s) in entry_list
    ]
    clusters = _cluster_by_grid(points, cell)

    w, h = widget_img.width, widget_img.height
    corners = np.array(
        [[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]]
    )
    sw, sh = screen_img.width, screen_img.height

    candidates = []
    for cluster in clusters:
        if len(cluster) < MIN_CLUSTER_MATCHES:
            continue
        cluster_matches = [
            MatchPair(entry_list[i][0], entry_list[i][1], 0.0, 1.0) for i in cluster
        ]
        est = estimate_homography(
            cluster_matches,
            target,
            source,
            seed=cfg.seed,
            max_iters=cfg.ransac_iters,
            inlier_px=cfg.ransac_inlier_px,
            confidence=cfg.ransac_confidence,
        )
        box = None
        if est is not None:
            hom, inliers = est
            quad = hom.project(corners)
            if _is_convex_quad(quad):
                x0 = int(np.floor(quad[:, 0].min()))
                y0 = int(np.floor(quad[:, 1].min()))
                x1 = int(np.ceil(quad[:, 0].max()))
                y1 = int(np.ceil(quad[:, 1].max()))
                x0, x1 = max(0, x0), min(sw - 1, x1)
                y0, y1 = max(0, y0), min(sh - 1, y1)
                if x0 <= x1 and y0 <= y1:
                    box = PixelBox(x0, y0, x1, y1)
                    score = len(inliers) / len(cluster)
                    support = len(inliers)
        if box is None:
            # No usable homography: centroid box at the recorded widget size.
            pts = np.array([points[i] for i in cluster])
            cx, cy = pts.mean(axis=0)
            x0 = int(round(cx - w / 2.0))
            y0 = int(round(cy - h / 2.0))
            x1, y1 = x0 + w - 1, y0 + h - 1
            x0, y0 = max(0, x0), max(0, y0)
            x1, y1 = min(sw - 1, max(x1, x0)), min(sh - 1, max(y1, y0))
            box = PixelBox(x0, y0, x1, y1)
            score = 0.5
            support = len(cluster)
        candidates.append(CandidateBox(box=box, score=score, support=support))

    candidates.sort(key=lambda c: (-c.score, c.box.y0, c.box.x0, c.box.y1, c.box.x1))
    return candidates
