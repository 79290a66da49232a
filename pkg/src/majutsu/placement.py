"""Procedural placement of vegetation and roadside furniture.

All sampling is seeded and deterministic; points are expressed in map meters
(pixel (r, c) spans [c*mpp, (c+1)*mpp] x [r*mpp, (r+1)*mpp]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage import measure

from .layout import DEFAULT_METERS_PER_PIXEL, LayoutMap, SemanticClass

KIND_TREE = "tree"
KIND_STREETLIGHT = "streetlight"
SOURCE_VEGETATION = "vegetation_fill"
SOURCE_ROADSIDE = "roadside"

# consecutive failed re-seed attempts before giving up on uncovered mask regions
_RESEED_ATTEMPTS = 200


@dataclass(frozen=True)
class PlacementPoint:
    position: tuple[float, float]  # map meters
    kind: str  # tree | streetlight
    source: str  # vegetation_fill | roadside


@dataclass(frozen=True)
class SamplingConfig:
    radius_r: float = 8.0
    max_attempts_k: int = 30
    roadside_spacing_s: float = 25.0
    roadside_offset_d: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.radius_r <= 0:
            raise ValueError("radius_r must be > 0")
        if self.roadside_spacing_s <= 0:
            raise ValueError("roadside_spacing_s must be > 0")
        if self.roadside_offset_d < 0:
            raise ValueError("roadside_offset_d must be >= 0")


def poisson_disk_sample(
    mask: np.ndarray,
    cfg: SamplingConfig,
    meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL,
) -> list[PlacementPoint]:
    """Bridson dart throwing restricted to mask pixels.

    Disconnected mask regions are covered by re-seeding after the active list
    drains. All pairwise distances are >= radius_r.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    h, w = mask.shape
    mpp = float(meters_per_pixel)
    width_m = w * mpp
    height_m = h * mpp
    r = cfg.radius_r
    cell = r / math.sqrt(2.0)
    gw = max(1, int(math.ceil(width_m / cell)))
    gh = max(1, int(math.ceil(height_m / cell)))
    grid: list[list[int | None]] = [[None] * gw for _ in range(gh)]
    pts: list[tuple[float, float]] = []
    rng = np.random.default_rng(cfg.seed)
    mask_pixels = np.argwhere(mask)

    def on_mask(x: float, y: float) -> bool:
        if not (0.0 <= x < width_m and 0.0 <= y < height_m):
            return False
        return bool(mask[int(y / mpp), int(x / mpp)])

    def fits(x: float, y: float) -> bool:
        gx = int(x / cell)
        gy = int(y / cell)
        for yy in range(max(0, gy - 2), min(gh, gy + 3)):
            for xx in range(max(0, gx - 2), min(gw, gx + 3)):
                idx = grid[yy][xx]
                if idx is not None:
                    px, py = pts[idx]
                    if (px - x) ** 2 + (py - y) ** 2 < r * r:
                        return False
        return True

    def accept(x: float, y: float) -> int:
        pts.append((x, y))
        grid[int(y / cell)][int(x / cell)] = len(pts) - 1
        return len(pts) - 1

    def drain(active: list[int]):
        while active:
            slot = int(rng.integers(len(active)))
            base = pts[active[slot]]
            placed = False
            for _ in range(cfg.max_attempts_k):
                rad = r * (1.0 + rng.random())
                ang = 2.0 * math.pi * rng.random()
                x = base[0] + rad * math.cos(ang)
                y = base[1] + rad * math.sin(ang)
                if on_mask(x, y) and fits(x, y):
                    active.append(accept(x, y))
                    placed = True
                    break
            if not placed:
                active[slot] = active[-1]
                active.pop()

    failures = 0
    while failures < _RESEED_ATTEMPTS:
        pr, pc = mask_pixels[int(rng.integers(len(mask_pixels)))]
        x = (pc + rng.random()) * mpp
        y = (pr + rng.random()) * mpp
        if fits(x, y):
            drain([accept(x, y)])
            failures = 0
        else:
            failures += 1

    return [
        PlacementPoint(position=(x, y), kind=KIND_TREE, source=SOURCE_VEGETATION)
        for x, y in pts
    ]


def distance_transform(
    mask: np.ndarray, meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL
) -> np.ndarray:
    """Exact Euclidean distance (meters) from each pixel to the nearest mask pixel.

    Mask pixels map to 0; an empty mask maps every pixel to +inf.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.full(mask.shape, np.inf, dtype=np.float64)
    return ndimage.distance_transform_edt(~mask) * float(meters_per_pixel)


def _resample_curve(curve_m: np.ndarray, spacing: float, closed: bool) -> np.ndarray:
    """Arc-length resampling; closed curves keep every gap within +-10%."""
    deltas = np.diff(curve_m, axis=0)
    seg = np.hypot(deltas[:, 0], deltas[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    if total <= 0:
        return curve_m[:1]
    if closed:
        n = max(1, int(round(total / spacing)))
        if n >= 2 and not (0.9 * spacing <= total / n <= 1.1 * spacing):
            candidates = [
                k
                for k in (n - 1, n + 1)
                if k >= 2 and 0.9 * spacing <= total / k <= 1.1 * spacing
            ]
            n = candidates[0] if candidates else 1
        positions = np.arange(n) * (total / n) if n >= 2 else np.array([0.0])
    else:
        positions = np.arange(0.0, total + 1e-9, spacing)
    x = np.interp(positions, cum, curve_m[:, 0])
    y = np.interp(positions, cum, curve_m[:, 1])
    return np.column_stack([x, y])


def sample_roadside_points(layout: LayoutMap, cfg: SamplingConfig) -> list[PlacementPoint]:
    """Trees and streetlights along the road-offset iso-distance band.

    Offset curves are marching-squares contours of the road distance field at
    offset_d, arc-length resampled at spacing_s; kinds alternate along each
    curve; points landing on road, building, or water pixels are dropped.
    """
    road = layout.mask(SemanticClass.ROAD)
    if not road.any():
        return []
    mpp = layout.meters_per_pixel
    dt = distance_transform(road, mpp)
    curves = measure.find_contours(dt, cfg.roadside_offset_d)

    blocked = (
        road
        | layout.mask(SemanticClass.BUILDING)
        | layout.mask(SemanticClass.WATER)
    )
    h, w = road.shape
    out: list[PlacementPoint] = []
    for curve in curves:
        closed = bool(np.array_equal(curve[0], curve[-1]))
        curve_m = np.column_stack([(curve[:, 1] + 0.5) * mpp, (curve[:, 0] + 0.5) * mpp])
        sampled = _resample_curve(curve_m, cfg.roadside_spacing_s, closed)
        for i, (x, y) in enumerate(sampled):
            col = int(x / mpp)
            row = int(y / mpp)
            if not (0 <= row < h and 0 <= col < w) or blocked[row, col]:
                continue
            kind = KIND_TREE if i % 2 == 0 else KIND_STREETLIGHT
            out.append(
                PlacementPoint(position=(float(x), float(y)), kind=kind, source=SOURCE_ROADSIDE)
            )
    return out
