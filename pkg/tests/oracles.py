"""Independent brute-force oracles used to freeze expected test values.

Everything here is deliberately naive (flood fill, O(n^2) scans, scalar
loops, scipy.stats closed forms) and shares no code path with the package
implementations it checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull
from scipy.stats import truncnorm


def flood_fill_components(mask: np.ndarray, connectivity: int = 8) -> list[set[tuple[int, int]]]:
    """Connected components as pixel sets, ordered by first raster pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    if connectivity == 8:
        neigh = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neigh = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                comp = set()
                stack = [(r, c)]
                seen[r, c] = True
                while stack:
                    cr, cc = stack.pop()
                    comp.add((cr, cc))
                    for dr, dc in neigh:
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            stack.append((nr, nc))
                comps.append(comp)
    return comps


def brute_force_edt(mask: np.ndarray, meters_per_pixel: float = 1.0) -> np.ndarray:
    """O(n^2) nearest-mask-pixel distance."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    out = np.full((h, w), np.inf)
    targets = np.argwhere(mask)
    if targets.size == 0:
        return out
    for r in range(h):
        for c in range(w):
            d2 = (targets[:, 0] - r) ** 2 + (targets[:, 1] - c) ** 2
            out[r, c] = math.sqrt(int(d2.min()))
    return out * meters_per_pixel


def brute_force_min_obb_area(points: np.ndarray) -> float:
    """Minimum area over rectangles aligned with each convex-hull edge."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    uniq = np.unique(pts, axis=0)
    if len(uniq) == 1:
        return 0.0
    if len(uniq) == 2:
        return 0.0
    try:
        hull = uniq[ConvexHull(uniq).vertices]
    except Exception:  # collinear input
        return 0.0
    best = math.inf
    n = len(hull)
    for i in range(n):
        ex, ey = hull[(i + 1) % n] - hull[i]
        length = math.hypot(ex, ey)
        if length < 1e-15:
            continue
        ux, uy = ex / length, ey / length
        proj_u = hull @ np.array([ux, uy])
        proj_v = hull @ np.array([-uy, ux])
        area = (proj_u.max() - proj_u.min()) * (proj_v.max() - proj_v.min())
        best = min(best, area)
    return best


def rasterize_reference(projected: np.ndarray, triangles: np.ndarray, resolution: int) -> np.ndarray:
    """Scalar per-pixel point-in-triangle rasterizer over the full frame."""
    bits = np.zeros((resolution, resolution), dtype=bool)
    for t0, t1, t2 in triangles:
        ax, ay = projected[t0]
        bx, by = projected[t1]
        cx, cy = projected[t2]
        for row in range(resolution):
            py = row + 0.5
            for col in range(resolution):
                px = col + 0.5
                e0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                e1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                e2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                if (e0 >= 0 and e1 >= 0 and e2 >= 0) or (e0 <= 0 and e1 <= 0 and e2 <= 0):
                    bits[row, col] = True
    return bits


def polygon_area(ring: np.ndarray) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def reference_trueskill_update(
    mu_w: float,
    sigma_w: float,
    mu_l: float,
    sigma_l: float,
    beta: float = 25.0 / 6.0,
    tau: float = 25.0 / 300.0,
) -> tuple[float, float, float, float]:
    """Win/loss two-player update from truncated-Gaussian moment matching.

    The standardized performance difference is a standard normal truncated to
    (-t, inf); its moments come from scipy.stats.truncnorm rather than the
    phi/Phi closed forms, so the numerics take an independent route.
    """
    var_w = sigma_w**2 + tau**2
    var_l = sigma_l**2 + tau**2
    c2 = 2.0 * beta**2 + var_w + var_l
    c = math.sqrt(c2)
    t = (mu_w - mu_l) / c
    dist = truncnorm(-t, np.inf)
    v = float(dist.mean())
    w = 1.0 - float(dist.var())
    new_mu_w = mu_w + (var_w / c) * v
    new_mu_l = mu_l - (var_l / c) * v
    new_sigma_w = math.sqrt(var_w * (1.0 - (var_w / c2) * w))
    new_sigma_l = math.sqrt(var_l * (1.0 - (var_l / c2) * w))
    return new_mu_w, new_sigma_w, new_mu_l, new_sigma_l
