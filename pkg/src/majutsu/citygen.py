"""Seeded offline generator for layout/height pairs.

Stands in for the external layout diffusion service: a jittered road grid,
block subdivision into building lots, parks and water blobs, and a height
field with a downtown bias. Output always satisfies the spatial-consistency
contract and contains all five classes.
"""

from __future__ import annotations

import numpy as np

from .layout import DEFAULT_H_MAX, DEFAULT_METERS_PER_PIXEL, HeightMap, LayoutMap, SemanticClass

G = int(SemanticClass.GROUND)
R = int(SemanticClass.ROAD)
W = int(SemanticClass.WATER)
V = int(SemanticClass.VEGETATION)
B = int(SemanticClass.BUILDING)

MIN_BUILDING_HEIGHT = 10.0


def _river(cells: np.ndarray, rng: np.random.Generator):
    h, w = cells.shape
    amplitude = rng.uniform(0.05, 0.18) * w
    period = rng.uniform(0.8, 1.6)
    phase = rng.uniform(0, 2 * np.pi)
    width = rng.integers(6, 14)
    center = rng.uniform(0.25, 0.75) * w
    rows = np.arange(h)
    xs = center + amplitude * np.sin(phase + period * 2 * np.pi * rows / h)
    for r in range(h):
        x0 = int(xs[r]) - width // 2
        cells[r, max(0, x0) : min(w, x0 + width)] = W


def _blobs(cells: np.ndarray, rng: np.random.Generator, value: int, count: int, r_lo: int, r_hi: int):
    h, w = cells.shape
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(count):
        cy = rng.uniform(0.1, 0.9) * h
        cx = rng.uniform(0.1, 0.9) * w
        ry = rng.integers(r_lo, r_hi)
        rx = rng.integers(r_lo, r_hi)
        blob = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        cells[blob & (cells == G)] = value


def _road_positions(extent: int, rng: np.random.Generator) -> list[int]:
    positions = []
    x = int(rng.integers(8, 30))
    while x < extent - 8:
        positions.append(x)
        x += int(rng.integers(36, 72))
    return positions


def generate_city(
    seed: int,
    size: int = 512,
    meters_per_pixel: float = DEFAULT_METERS_PER_PIXEL,
    h_max: float = DEFAULT_H_MAX,
    want_river: bool | None = None,
) -> tuple[LayoutMap, HeightMap]:
    rng = np.random.default_rng(np.random.PCG64(seed))
    cells = np.full((size, size), G, dtype=np.uint8)
    heights = np.zeros((size, size), dtype=np.float64)

    if want_river is None:
        want_river = bool(rng.random() < 0.5)
    else:
        rng.random()  # keep the draw sequence stable either way
    if want_river:
        _river(cells, rng)
    _blobs(cells, rng, W, count=int(rng.integers(0, 3)), r_lo=8, r_hi=24)
    _blobs(cells, rng, V, count=int(rng.integers(2, 5)), r_lo=10, r_hi=30)

    road_w = 2
    cols = _road_positions(size, rng)
    rows = _road_positions(size, rng)
    for x in cols:
        cells[:, x : x + road_w] = R
    for y in rows:
        cells[y : y + road_w, :] = R

    # blocks between consecutive roads
    col_edges = [0] + [c + road_w for c in cols] + [size]
    row_edges = [0] + [r + road_w for r in rows] + [size]
    col_spans = [
        (col_edges[i], (cols[i] if i < len(cols) else size))
        for i in range(len(col_edges) - 1)
    ]
    row_spans = [
        (row_edges[i], (rows[i] if i < len(rows) else size))
        for i in range(len(row_edges) - 1)
    ]

    center = size / 2.0
    for r0, r1 in row_spans:
        for c0, c1 in col_spans:
            bh = r1 - r0
            bw = c1 - c0
            if bh < 12 or bw < 12:
                continue
            roll = rng.random()
            if roll < 0.12:  # park block
                cells[r0 + 2 : r1 - 2, c0 + 2 : c1 - 2][
                    cells[r0 + 2 : r1 - 2, c0 + 2 : c1 - 2] == G
                ] = V
                continue
            if roll < 0.18:  # open block
                continue
            margin = 3
            lot = int(rng.integers(10, 18))
            for ly in range(r0 + margin, r1 - margin - 3, lot):
                for lx in range(c0 + margin, c1 - margin - 3, lot):
                    ly1 = min(ly + lot - 2, r1 - margin)
                    lx1 = min(lx + lot - 2, c1 - margin)
                    if ly1 - ly < 4 or lx1 - lx < 4:
                        continue
                    if rng.random() < 0.18:
                        continue
                    inset_y = int(rng.integers(0, 2))
                    inset_x = int(rng.integers(0, 2))
                    patch = cells[ly + inset_y : ly1, lx + inset_x : lx1]
                    if (patch != G).any():
                        continue  # keep water/vegetation/roads intact
                    dist = np.hypot((ly + ly1) / 2 - center, (lx + lx1) / 2 - center)
                    downtown = max(0.0, 1.0 - dist / (0.7 * size))
                    base = rng.uniform(MIN_BUILDING_HEIGHT, 40.0)
                    tall = rng.uniform(0.0, 90.0) * downtown**2
                    height = min(base + tall, 0.9 * h_max)
                    patch[:] = B
                    heights[ly + inset_y : ly1, lx + inset_x : lx1] = height

    # guarantee all five classes
    stamps = {
        W: ((4, 10), (4, 10)),
        V: ((4, 10), (12, 18)),
        R: ((12, 14), (0, size)),
        B: ((20, 26), (4, 10)),
    }
    for value, ((r0, r1), (c0, c1)) in stamps.items():
        if not (cells == value).any():
            cells[r0:r1, c0:c1] = value
            if value == B:
                heights[r0:r1, c0:c1] = 20.0
    if not (cells == G).any():
        cells[0:2, 0:2] = G
        heights[0:2, 0:2] = 0.0

    heights[cells != B] = 0.0
    # quantize to the 16-bit height encoding so PNG round trips are exact
    heights = np.rint(np.clip(heights / h_max, 0.0, 1.0) * 65535) / 65535 * h_max

    layout = LayoutMap(cells=cells, meters_per_pixel=meters_per_pixel)
    hmap = HeightMap(heights=heights, h_max=h_max)
    return layout, hmap
