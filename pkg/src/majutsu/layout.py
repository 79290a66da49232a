"""Semantic layout / height map decoding, validation, and building extraction.

Map frame convention used across the package: x runs along columns, y along
rows, both in meters; pixel (row, col) covers the square
[col*mpp, (col+1)*mpp] x [row*mpp, (row+1)*mpp]. Rings with positive shoelace
area are called counter-clockwise (CCW) in this frame.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import (
    CorruptImage,
    DimensionMismatch,
    EmptyMask,
    MultipleComponents,
    NegativeHMax,
    NonPaletteColor,
)

logger = logging.getLogger(__name__)

DEFAULT_METERS_PER_PIXEL = 2.0
DEFAULT_H_MAX = 150.0
DEFAULT_MIN_BUILDING_HEIGHT = 3.0
MIN_INSTANCE_PIXELS = 4

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class SemanticClass(IntEnum):
    GROUND = 0
    ROAD = 1
    WATER = 2
    VEGETATION = 3
    BUILDING = 4


PALETTE: dict[SemanticClass, tuple[int, int, int]] = {
    SemanticClass.GROUND: (200, 200, 200),
    SemanticClass.ROAD: (80, 80, 80),
    SemanticClass.WATER: (60, 120, 220),
    SemanticClass.VEGETATION: (60, 180, 75),
    SemanticClass.BUILDING: (230, 90, 60),
}

_RGB_TO_CLASS = {rgb: cls for cls, rgb in PALETTE.items()}


def palette_json() -> dict:
    """Machine-readable palette, published alongside the file format."""
    return {
        "classes": [
            {"name": cls.name.lower(), "code": int(cls), "rgb": list(PALETTE[cls])}
            for cls in SemanticClass
        ]
    }


@dataclass(frozen=True)
class LayoutMap:
    """Grid of semantic classes plus the map scale."""

    cells: np.ndarray  # (h, w) uint8 of SemanticClass codes
    meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL

    def __post_init__(self):
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.uint8))
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError("layout grid must be 2D and non-empty")
        if cells.max(initial=0) > max(SemanticClass):
            raise ValueError("layout grid holds invalid class codes")
        if self.meters_per_pixel <= 0:
            raise ValueError("meters_per_pixel must be positive")
        object.__setattr__(self, "cells", cells)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def mask(self, cls: SemanticClass) -> np.ndarray:
        return self.cells == int(cls)

    def class_counts(self) -> dict[SemanticClass, int]:
        counts = np.bincount(self.cells.ravel(), minlength=len(SemanticClass))
        return {cls: int(counts[int(cls)]) for cls in SemanticClass}


@dataclass(frozen=True)
class HeightMap:
    """Per-pixel building heights in meters."""

    heights: np.ndarray  # (h, w) float64, meters
    h_max: float = DEFAULT_H_MAX

    def __post_init__(self):
        heights = np.ascontiguousarray(np.asarray(self.heights, dtype=np.float64))
        if heights.ndim != 2:
            raise ValueError("height grid must be 2D")
        if not np.isfinite(heights).all() or (heights < 0).any():
            raise ValueError("heights must be finite and non-negative")
        object.__setattr__(self, "heights", heights)

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]


@dataclass(frozen=True)
class FootprintPolygon:
    """Vector boundary of one building mask, in map meters.

    The outer ring is CCW (positive shoelace), holes are CW. Rings may touch
    themselves at single lattice points (diagonal pixel pinches) but edges
    never properly cross.
    """

    outer: np.ndarray  # (n, 2) float64
    holes: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        outer = np.asarray(self.outer, dtype=np.float64)
        if outer.ndim != 2 or outer.shape[0] < 3 or outer.shape[1] != 2:
            raise ValueError("outer ring needs at least 3 2D vertices")
        object.__setattr__(self, "outer", outer)
        object.__setattr__(
            self, "holes", tuple(np.asarray(h, dtype=np.float64) for h in self.holes)
        )

    def area(self) -> float:
        return ring_area(self.outer) + sum(ring_area(h) for h in self.holes)


@dataclass(frozen=True)
class BuildingInstance:
    """One 8-connected building unit extracted from the layout."""

    id: str
    pixel_count: int
    footprint: FootprintPolygon
    obb: "OrientedBox"  # noqa: F821 - geometry.OrientedBox, kept loose to avoid a cycle
    target_height: float
    bbox: tuple[int, int, int, int] = (0, 0, 0, 0)  # (row0, col0, row1, col1), exclusive


@dataclass
class ValidationReport:
    """Spatial-consistency check between a layout and its height map."""

    low_building_pixels: list[tuple[int, int]] = field(default_factory=list)
    nonzero_nonbuilding_pixels: list[tuple[int, int]] = field(default_factory=list)
    repaired_heights: HeightMap | None = None

    @property
    def valid(self) -> bool:
        return not self.low_building_pixels and not self.nonzero_nonbuilding_pixels


def ring_area(ring: np.ndarray) -> float:
    """Signed shoelace area; positive for CCW rings in the map frame."""
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# -- PNG codecs ----------------------------------------------------------------


def decode_layout_image(image_bytes: bytes, meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL) -> LayoutMap:
    """Decode an 8-bit RGB PNG into a LayoutMap; every pixel must be a palette color."""
    try:
        img = Image.open(io.BytesIO(image_bytes))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImage(str(exc)) from exc
    if img.mode != "RGB":
        raise CorruptImage(f"expected 8-bit RGB, got mode {img.mode!r}")
    rgb = np.asarray(img, dtype=np.uint8)

    cells = np.full(rgb.shape[:2], 255, dtype=np.uint8)
    for cls, color in PALETTE.items():
        cells[(rgb == np.array(color, dtype=np.uint8)).all(axis=-1)] = int(cls)
    bad = np.argwhere(cells == 255)
    if bad.size:
        r, c = bad[0]
        raise NonPaletteColor(int(c), int(r), tuple(int(v) for v in rgb[r, c]))
    return LayoutMap(cells=cells, meters_per_pixel=meters_per_pixel)


def encode_layout_image(layout: LayoutMap) -> bytes:
    """Inverse of decode_layout_image; bit-exact round trip."""
    lut = np.zeros((len(SemanticClass), 3), dtype=np.uint8)
    for cls, color in PALETTE.items():
        lut[int(cls)] = color
    rgb = lut[layout.cells]
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_height_image(image_bytes: bytes, h_max: float = DEFAULT_H_MAX) -> HeightMap:
    """Decode an 8- or 16-bit grayscale PNG; height = pixel / max_code * h_max."""
    if h_max < 0:
        raise NegativeHMax(f"h_max must be >= 0, got {h_max}")
    try:
        img = Image.open(io.BytesIO(image_bytes))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImage(str(exc)) from exc
    if img.mode == "L":
        codes = np.asarray(img, dtype=np.float64)
        max_code = 255.0
    elif img.mode in ("I;16", "I;16B", "I"):
        codes = np.asarray(img, dtype=np.float64)
        max_code = 65535.0
    else:
        raise CorruptImage(f"expected grayscale PNG, got mode {img.mode!r}")
    return HeightMap(heights=codes / max_code * h_max, h_max=h_max)


def encode_height_image(hmap: HeightMap, bits: int = 16) -> bytes:
    """Quantize heights back to a grayscale PNG (8 or 16 bit)."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    max_code = 255 if bits == 8 else 65535
    codes = np.rint(np.clip(hmap.heights / hmap.h_max, 0.0, 1.0) * max_code)
    buf = io.BytesIO()
    if bits == 8:
        Image.fromarray(codes.astype(np.uint8), mode="L").save(buf, format="PNG")
    else:
        Image.fromarray(codes.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


# -- consistency ---------------------------------------------------------------


def validate_consistency(
    layout: LayoutMap,
    hmap: HeightMap,
    min_height: float = DEFAULT_MIN_BUILDING_HEIGHT,
) -> ValidationReport:
    """Check that positive heights cover exactly the building mask.

    Violations are reported and a repaired height map is attached: building
    pixels below min_height are clamped up, positive heights outside the
    building mask are zeroed.
    """
    if layout.cells.shape != hmap.heights.shape:
        raise DimensionMismatch(
            f"layout {layout.cells.shape} vs height map {hmap.heights.shape}"
        )
    building = layout.mask(SemanticClass.BUILDING)
    heights = hmap.heights

    low = building & (heights < min_height)
    stray = ~building & (heights > 0)

    report = ValidationReport(
        low_building_pixels=[(int(r), int(c)) for r, c in np.argwhere(low)],
        nonzero_nonbuilding_pixels=[(int(r), int(c)) for r, c in np.argwhere(stray)],
    )
    repaired = heights.copy()
    repaired[low] = min_height
    repaired[stray] = 0.0
    report.repaired_heights = HeightMap(heights=repaired, h_max=hmap.h_max)
    if report.low_building_pixels:
        logger.warning(
            "clamped %d building pixels below %.1f m", len(report.low_building_pixels), min_height
        )
    if report.nonzero_nonbuilding_pixels:
        logger.warning(
            "zeroed %d positive heights outside the building mask",
            len(report.nonzero_nonbuilding_pixels),
        )
    return report


# -- boundary tracing ----------------------------------------------------------

# Directed crack edges keep the mask interior on a consistent side, so outer
# rings come out with positive shoelace and holes negative. At checkerboard
# corners the walker takes the negative-cross turn, which merges diagonal
# foreground (8-connected regions stay one ring) and splits diagonal
# background (holes stay 4-connected).


def _crack_edges(mask: np.ndarray) -> dict[tuple[int, int], list[tuple[int, int]]]:
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    inside = padded[1:-1, 1:-1]
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    rows, cols = np.nonzero(inside)
    north = ~padded[0:-2, 1:-1]
    south = ~padded[2:, 1:-1]
    west = ~padded[1:-1, 0:-2]
    east = ~padded[1:-1, 2:]
    for r, c in zip(rows.tolist(), cols.tolist()):
        if north[r, c]:
            add((c, r), (c + 1, r))
        if east[r, c]:
            add((c + 1, r), (c + 1, r + 1))
        if south[r, c]:
            add((c + 1, r + 1), (c, r + 1))
        if west[r, c]:
            add((c, r + 1), (c, r))
    return edges


def trace_region_rings(mask: np.ndarray) -> list[np.ndarray]:
    """All crack-boundary rings of a binary mask, in pixel units.

    Returns closed rings (first vertex not repeated); positive-area rings are
    outer boundaries, negative-area rings are holes.
    """
    edges = _crack_edges(np.asarray(mask, dtype=bool))
    rings: list[np.ndarray] = []
    while edges:
        start = min(edges)
        ring = [start]
        prev_dir = None
        point = start
        while True:
            outs = edges[point]
            if len(outs) == 1 or prev_dir is None:
                nxt = outs[0]
            else:
                # checkerboard corner: take the negative-cross (crossing) turn
                nxt = None
                for cand in outs:
                    d = (cand[0] - point[0], cand[1] - point[1])
                    if prev_dir[0] * d[1] - prev_dir[1] * d[0] < 0:
                        nxt = cand
                        break
                if nxt is None:
                    nxt = outs[0]
            outs.remove(nxt)
            if not outs:
                del edges[point]
            prev_dir = (nxt[0] - point[0], nxt[1] - point[1])
            point = nxt
            if point == start:
                break
            ring.append(point)
        rings.append(np.array(ring, dtype=np.float64))
    return rings


def _collapse_collinear(ring: np.ndarray) -> np.ndarray:
    """Drop vertices lying on the segment between their neighbors."""
    n = len(ring)
    prev_pts = np.roll(ring, 1, axis=0)
    next_pts = np.roll(ring, -1, axis=0)
    a = next_pts - prev_pts
    b = ring - prev_pts
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    keep = np.abs(cross) > 1e-12
    if keep.sum() < 3:
        return ring
    return ring[keep]


def _segments_properly_cross(p1, p2, p3, p4) -> bool:
    def cross(ax, ay, bx, by):
        return ax * by - ay * bx

    d1 = cross(p4[0] - p3[0], p4[1] - p3[1], p1[0] - p3[0], p1[1] - p3[1])
    d2 = cross(p4[0] - p3[0], p4[1] - p3[1], p2[0] - p3[0], p2[1] - p3[1])
    d3 = cross(p2[0] - p1[0], p2[1] - p1[1], p3[0] - p1[0], p3[1] - p1[1])
    d4 = cross(p2[0] - p1[0], p2[1] - p1[1], p4[0] - p1[0], p4[1] - p1[1])
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and all(
        abs(d) > 1e-12 for d in (d1, d2, d3, d4)
    )


def _ring_self_crosses(ring: np.ndarray) -> bool:
    n = len(ring)
    pts = [(float(x), float(y)) for x, y in ring]
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_properly_cross(a, b, pts[j], pts[(j + 1) % n]):
                return True
    return False


def _douglas_peucker(points: np.ndarray, tol: float) -> np.ndarray:
    """Iterative DP on an open polyline, endpoints kept."""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = points[j] - points[i]
        length = math.hypot(seg[0], seg[1])
        mid = points[i + 1 : j]
        if length < 1e-12:
            dist = np.hypot(mid[:, 0] - points[i, 0], mid[:, 1] - points[i, 1])
        else:
            dx = mid[:, 0] - points[i, 0]
            dy = mid[:, 1] - points[i, 1]
            dist = np.abs(seg[0] * dy - seg[1] * dx) / length
        k = int(np.argmax(dist))
        if dist[k] > tol:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return points[keep]


def simplify_ring(ring: np.ndarray, tol: float) -> np.ndarray:
    """Simplify a closed ring; collinear collapse, then Douglas-Peucker.

    Falls back to the collinear-only ring if DP would introduce a proper
    self-crossing or collapse the ring below 3 vertices.
    """
    ring = _collapse_collinear(ring)
    if tol <= 0 or len(ring) <= 4:
        return ring
    # split at the two mutually farthest of four extreme vertices
    i0 = int(np.lexsort((ring[:, 1], ring[:, 0]))[0])
    rolled = np.roll(ring, -i0, axis=0)
    d = np.hypot(rolled[:, 0] - rolled[0, 0], rolled[:, 1] - rolled[0, 1])
    i1 = int(np.argmax(d))
    if i1 == 0:
        return ring
    first = _douglas_peucker(rolled[: i1 + 1], tol)
    second = _douglas_peucker(np.vstack([rolled[i1:], rolled[:1]]), tol)
    out = np.vstack([first[:-1], second[:-1]])
    if len(out) < 3 or _ring_self_crosses(out):
        return ring
    return out


def trace_footprint(
    instance_mask: np.ndarray,
    meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL,
    simplify_tol: float | None = None,
) -> FootprintPolygon:
    """Vectorize a single 8-connected building mask into a footprint polygon.

    The boundary follows pixel edges, so the unsimplified polygon area equals
    the mask pixel area exactly. Default simplification tolerance is
    0.5 * meters_per_pixel.
    """
    mask = np.asarray(instance_mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("instance mask has no pixels")
    _, n_comp = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if n_comp != 1:
        raise MultipleComponents(f"expected one 8-connected component, found {n_comp}")
    if simplify_tol is None:
        simplify_tol = 0.5 * meters_per_pixel

    rings = trace_region_rings(mask)
    outer = None
    holes = []
    for ring in rings:
        scaled = simplify_ring(ring, simplify_tol / meters_per_pixel) * meters_per_pixel
        if ring_area(scaled) > 0:
            outer = scaled
        else:
            holes.append(scaled)
    if outer is None:  # unreachable for a nonempty component
        raise EmptyMask("no outer boundary found")
    return FootprintPolygon(outer=outer, holes=tuple(holes))


# -- instance extraction ---------------------------------------------------------


def extract_building_instances(
    layout: LayoutMap,
    hmap: HeightMap,
    min_pixels: int = MIN_INSTANCE_PIXELS,
) -> list[BuildingInstance]:
    """Split the building mask into 8-connected instances with footprints and OBBs.

    Instances are ordered and numbered by the raster position of their first
    pixel; components smaller than min_pixels are dropped.
    """
    from .geometry import compute_obb  # local import to avoid a module cycle

    if layout.cells.shape != hmap.heights.shape:
        raise DimensionMismatch(
            f"layout {layout.cells.shape} vs height map {hmap.heights.shape}"
        )
    building = layout.mask(SemanticClass.BUILDING)
    labels, n = ndimage.label(building, structure=EIGHT_CONNECTED)
    if n == 0:
        return []

    flat_first = np.full(n + 1, labels.size, dtype=np.int64)
    flat = labels.ravel()
    idx = np.nonzero(flat)[0]
    np.minimum.at(flat_first, flat[idx], idx)
    order = sorted(range(1, n + 1), key=lambda lab: flat_first[lab])

    slices = ndimage.find_objects(labels)
    mpp = layout.meters_per_pixel
    instances: list[BuildingInstance] = []
    seq = 0
    for lab in order:
        sl = slices[lab - 1]
        local = labels[sl] == lab
        count = int(local.sum())
        if count < min_pixels:
            logger.warning("dropping %d-pixel building component (label %d)", count, lab)
            continue
        fp_local = trace_footprint(local, mpp)
        offset = np.array([sl[1].start, sl[0].start], dtype=np.float64) * mpp
        footprint = FootprintPolygon(
            outer=fp_local.outer + offset,
            holes=tuple(h + offset for h in fp_local.holes),
        )
        target = float(hmap.heights[sl][local].mean())
        instances.append(
            BuildingInstance(
                id=f"bldg_{seq:04d}",
                pixel_count=count,
                footprint=footprint,
                obb=compute_obb(footprint.outer),
                target_height=target,
                bbox=(sl[0].start, sl[1].start, sl[0].stop, sl[1].stop),
            )
        )
        seq += 1
    return instances
