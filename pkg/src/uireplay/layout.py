"""Layout characterization: segment a screenshot into groups, lines, columns.

Widget contours come from the edge pipeline (Canny, dilation, connected
components) and are filtered by three noise rules before segmentation:

  R1  drop boxes with both width and height under 2% of the screen width
  R2  drop boxes nested inside another box, unless the inner box is at least
      60% of the screen width in either dimension
  R3  drop boxes smaller than 1% of the screenshot area

Every surviving widget gets a (group, line, column) address that is stable
across resolutions, which is what lets a recorded widget be relocated on a
differently rendered screen. Text, when available, refines the relocation.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import EngineConfig
from .features import CandidateBox
from .geometry import PixelBox, RelPoint
from .imaging import GrayImage, canny, dilate, find_contours


class LayoutError(ValueError):
    """Raised for malformed layout or OCR sidecar data."""


@dataclass(frozen=True)
class LayoutEntry:
    box: PixelBox
    group: int
    line: int
    column: int
    text: str | None = None

    @property
    def address(self) -> tuple[int, int, int]:
        return (self.group, self.line, self.column)


@dataclass(frozen=True)
class LayoutMap:
    """All widget boxes of one screenshot, each with its 3-part address."""

    resolution: tuple[int, int]
    entries: tuple[LayoutEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            if e.address in seen:
                raise LayoutError(f"duplicate layout address {e.address}")
            seen.add(e.address)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TextRegion:
    """A located piece of text with recognition confidence."""

    box: PixelBox
    text: str
    confidence: float

    def __post_init__(self):
        if not self.text:
            raise LayoutError("text region must carry non-empty text")
        if not (0.0 <= self.confidence <= 1.0):
            raise LayoutError(f"confidence must be in [0, 1], got {self.confidence}")


def filter_widget_boxes(
    boxes: list[PixelBox], resolution: tuple[int, int], config: EngineConfig | None = None
) -> list[PixelBox]:
    """Apply the noise rules R1, R2, R3 in that order."""
    cfg = config or EngineConfig()
    w, h = resolution

    min_dim = cfg.min_dim_frac * w
    stage1 = [b for b in boxes if not (b.width < min_dim and b.height < min_dim)]

    keep_dim = cfg.nested_keep_frac * w
    stage2 = []
    for b in stage1:
        nested = any(o != b and o.contains_box(b) for o in stage1)
        if nested and not (b.width >= keep_dim or b.height >= keep_dim):
            continue
        stage2.append(b)

    min_area = cfg.min_area_frac * (w * h)
    stage3 = [b for b in stage2 if b.area >= min_area]
    return stage3


def extract_widget_boxes(
    screen: GrayImage, config: EngineConfig | None = None
) -> list[PixelBox]:
    """Widget bounding boxes of a screenshot: edges, dilation, contours, filters."""
    cfg = config or EngineConfig()
    edges = canny(screen, cfg.canny_low, cfg.canny_high, cfg.canny_sigma)
    edges = dilate(edges, cfg.dilation_radius)
    boxes = [c.box for c in find_contours(edges)]
    if cfg.top_crop_px > 0:
        # Optional status-bar strip: ignore anything fully above the cut.
        boxes = [b for b in boxes if b.y1 >= cfg.top_crop_px]
    boxes = filter_widget_boxes(boxes, screen.resolution, cfg)
    boxes.sort(key=lambda b: (b.y0, b.x0, b.y1, b.x1))
    return boxes


def characterize(
    boxes: list[PixelBox],
    resolution: tuple[int, int],
    config: EngineConfig | None = None,
) -> LayoutMap:
    """Assign (group, line, column) addresses to filtered widget boxes.

    Groups split where the vertical gap between consecutive vertical extents
    exceeds `group_gap_frac` of the screen height. Within a group, boxes
    sharing at least `line_overlap_frac` of the smaller height form a line
    (transitively). Within a line, boxes are columns ordered left to right.
    """
    cfg = config or EngineConfig()
    if not boxes:
        return LayoutMap(resolution=resolution, entries=())
    gap_limit = cfg.group_gap_frac * resolution[1]

    ordered = sorted(boxes, key=lambda b: (b.y0, b.x0, b.y1, b.x1))
    groups: list[list[PixelBox]] = [[ordered[0]]]
    group_bottom = ordered[0].y1
    for b in ordered[1:]:
        if b.y0 - group_bottom - 1 > gap_limit:
            groups.append([b])
            group_bottom = b.y1
        else:
            groups[-1].append(b)
            group_bottom = max(group_bottom, b.y1)

    entries = []
    for g, members in enumerate(groups):
        # Lines: transitive closure of the pairwise vertical-overlap relation.
        parent = list(range(len(members)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                a, b = members[i], members[j]
                overlap = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
                if overlap >= cfg.line_overlap_frac * min(a.height, b.height):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[max(ri, rj)] = min(ri, rj)

        lines: dict[int, list[PixelBox]] = {}
        for i in range(len(members)):
            lines.setdefault(find(i), []).append(members[i])
        line_list = sorted(
            lines.values(), key=lambda bs: min((b.y0, b.x0) for b in bs)
        )
        for l, line_boxes in enumerate(line_list):
            line_boxes.sort(key=lambda b: (b.x0, b.y0, b.x1, b.y1))
            for c, box in enumerate(line_boxes):
                entries.append(LayoutEntry(box=box, group=g, line=l, column=c))

    entries.sort(key=lambda e: e.address)
    return LayoutMap(resolution=resolution, entries=tuple(entries))


def characterize_screen(
    screen: GrayImage, config: EngineConfig | None = None
) -> LayoutMap:
    """extract_widget_boxes followed by characterize, on one screenshot."""
    cfg = config or EngineConfig()
    return characterize(extract_widget_boxes(screen, cfg), screen.resolution, cfg)


def tuple_of_point(layout: LayoutMap, p: RelPoint) -> LayoutEntry | None:
    """The entry whose box holds the point: smallest area wins, then nearest center.

    Returns None only for an empty layout.
    """
    if not layout.entries:
        return None
    px, py = p.to_pixels(layout.resolution)
    containing = [e for e in layout.entries if e.box.contains_point(px, py)]
    if containing:
        return min(containing, key=lambda e: (e.box.area, e.address))
    return min(
        layout.entries,
        key=lambda e: (
            (e.box.center[0] - px) ** 2 + (e.box.center[1] - py) ** 2,
            e.address,
        ),
    )


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def text_similarity(a: str, b: str) -> float:
    """Normalized edit similarity: 1 - levenshtein / max length, on folded text."""
    a = " ".join(a.casefold().split())
    b = " ".join(b.casefold().split())
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - levenshtein(a, b) / longest


def assign_text(layout: LayoutMap, regions: list[TextRegion]) -> LayoutMap:
    """Attach OCR text to the smallest entry containing each region's center."""
    if not regions or not layout.entries:
        return layout
    texts: dict[tuple[int, int, int], list[tuple[tuple, str]]] = {}
    for r in regions:
        cx, cy = r.box.center
        holders = [e for e in layout.entries if e.box.contains_point(cx, cy)]
        if not holders:
            continue
        owner = min(holders, key=lambda e: (e.box.area, e.address))
        texts.setdefault(owner.address, []).append(((r.box.y0, r.box.x0), r.text))
    new_entries = []
    for e in layout.entries:
        if e.address in texts:
            joined = " ".join(t for _, t in sorted(texts[e.address]))
            new_entries.append(replace(e, text=joined))
        else:
            new_entries.append(e)
    return LayoutMap(resolution=layout.resolution, entries=tuple(new_entries))


def locate_by_tuple(
    replay_layout: LayoutMap,
    recorded_address: tuple[int, int, int],
    recorded_text: str = "",
    ocr_regions: list[TextRegion] | None = None,
    config: EngineConfig | None = None,
) -> CandidateBox | None:
    """Relocate a recorded (group, line, column) address on the replay layout.

    Exact address match when present, otherwise the nearest group, then line,
    then column. When the recorded step carries text and OCR data is
    available, a text match (similarity >= threshold) within the matched
    group takes precedence. Always exactly one candidate for a non-empty
    layout; None for an empty one.
    """
    cfg = config or EngineConfig()
    layout = replay_layout
    if ocr_regions:
        layout = assign_text(layout, ocr_regions)
    if not layout.entries:
        return None
    g, l, c = recorded_address

    groups = sorted({e.group for e in layout.entries})
    g2 = min(groups, key=lambda v: (abs(v - g), v))
    lines = sorted({e.line for e in layout.entries if e.group == g2})
    l2 = min(lines, key=lambda v: (abs(v - l), v))
    cols = sorted(
        {e.column for e in layout.entries if e.group == g2 and e.line == l2}
    )
    c2 = min(cols, key=lambda v: (abs(v - c), v))
    chosen = next(
        e for e in layout.entries if e.address == (g2, l2, c2)
    )

    if recorded_text:
        group_entries = [e for e in layout.entries if e.group == g2 and e.text]
        scored = [
            (text_similarity(e.text, recorded_text), e) for e in group_entries
        ]
        scored = [(s, e) for s, e in scored if s >= cfg.text_similarity]
        if scored:
            scored.sort(key=lambda se: (-se[0], se[1].address))
            chosen = scored[0][1]

    return CandidateBox(box=chosen.box, score=1.0, support=0)


def layout_to_xml(layout: LayoutMap) -> bytes:
    root = ET.Element(
        "layout", w=str(layout.resolution[0]), h=str(layout.resolution[1])
    )
    for e in layout.entries:
        attrs = {
            "g": str(e.group),
            "l": str(e.line),
            "c": str(e.column),
            "x0": str(e.box.x0),
            "y0": str(e.box.y0),
            "x1": str(e.box.x1),
            "y1": str(e.box.y1),
        }
        if e.text is not None:
            attrs["text"] = e.text
        ET.SubElement(root, "widget", attrs)
    return ET.tostring(root, encoding="utf-8")


def layout_from_xml(data: bytes) -> LayoutMap:
    root = ET.fromstring(data)
    if root.tag != "layout":
        raise LayoutError(f"expected <layout> root, got <{root.tag}>")
    entries = []
    for el in root.findall("widget"):
        entries.append(
            LayoutEntry(
                box=PixelBox(
                    int(el.get("x0")), int(el.get("y0")), int(el.get("x1")), int(el.get("y1"))
                ),
                group=int(el.get("g")),
                line=int(el.get("l")),
                column=int(el.get("c")),
                text=el.get("text"),
            )
        )
    return LayoutMap(
        resolution=(int(root.get("w")), int(root.get("h"))), entries=tuple(entries)
    )


def load_ocr_sidecar(path: str | Path, resolution: tuple[int, int]) -> list[TextRegion]:
    """Parse `<ocr><region x0 y0 x1 y1 conf>text</region></ocr>` annotations.

    Regions outside the image bounds are rejected at load.
    """
    try:
        root = ET.parse(Path(path)).getroot()
    except ET.ParseError as exc:
        raise LayoutError(f"malformed OCR sidecar {path}: {exc}") from exc
    if root.tag != "ocr":
        raise LayoutError(f"expected <ocr> root in {path}, got <{root.tag}>")
    regions = []
    w, h = resolution
    for el in root.findall("region"):
        box = PixelBox(
            int(el.get("x0")), int(el.get("y0")), int(el.get("x1")), int(el.get("y1"))
        )
        if not box.within_bounds(w, h):
            raise LayoutError(f"OCR region {box} outside {w}x{h} image bounds")
        regions.append(
            TextRegion(box=box, text=(el.text or "").strip(), confidence=float(el.get("conf", "1.0")))
        )
    return regions


class SidecarOcr:
    """OCR stand-in that replays regions from an annotation file.

    A real OCR engine can be plugged in behind the same `extract` signature;
    this default keeps the build free of model dependencies.
    """

    def __init__(self, regions: list[TextRegion]):
        self.regions = list(regions)

    @classmethod
    def load(cls, path: str | Path, resolution: tuple[int, int]) -> "SidecarOcr":
        return cls(load_ocr_sidecar(path, resolution))

    def extract(self, img: GrayImage) -> list[TextRegion]:
        return [
            r for r in self.regions if r.box.within_bounds(img.width, img.height)
        ]
