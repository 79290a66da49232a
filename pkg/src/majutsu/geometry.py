"""Mesh construction and geometric fitting.

Covers footprint extrusion, minimum-area oriented boxes, similarity
placements, surface point sampling, isometric silhouette rendering, and
planar layer-mask triangulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import earcut
from .errors import (
    DegenerateAsset,
    DegenerateOBB,
    EmptyInput,
    EmptyMesh,
    InvalidPolygon,
    ResolutionMismatch,
    ZeroHeight,
)
from .layout import (
    EIGHT_CONNECTED,
    FootprintPolygon,
    _collapse_collinear,
    ring_area,
    trace_region_rings,
)

MIN_TRIANGLE_AREA = 1e-9  # m^2, degenerate rejection threshold

# fixed isometric camera: azimuth 45 deg, elevation atan(1/sqrt(2))
ISO_AZIMUTH = math.pi / 4
ISO_ELEVATION = math.atan(1.0 / math.sqrt(2.0))
ISO_MARGIN = 0.05


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle mesh in meters with per-vertex normals and optional UVs."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int32
    normals: np.ndarray  # (n, 3) float64, unit
    uvs: np.ndarray | None = None  # (n, 2) float64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64)).reshape(-1, 3)
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int32)).reshape(-1, 3)
        n = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64)).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        if len(n) != len(v):
            raise ValueError("need one normal per vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)
        if self.uvs is not None:
            uv = np.ascontiguousarray(np.asarray(self.uvs, dtype=np.float64)).reshape(-1, 2)
            if len(uv) != len(v):
                raise ValueError("need one uv per vertex")
            object.__setattr__(self, "uvs", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def signed_volume(self) -> float:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def transformed(self, matrix: np.ndarray) -> "Mesh":
        """Apply a 4x4 affine transform; normals get the inverse-transpose."""
        v = self.vertices @ matrix[:3, :3].T + matrix[:3, 3]
        nmat = np.linalg.inv(matrix[:3, :3]).T
        n = self.normals @ nmat.T
        lens = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.divide(n, lens, out=np.zeros_like(n), where=lens > 0)
        return Mesh(vertices=v, triangles=self.triangles.copy(), normals=n, uvs=self.uvs)


def merge_meshes(meshes: list[Mesh]) -> Mesh:
    meshes = [m for m in meshes if m.n_vertices]
    if not meshes:
        return empty_mesh()
    verts = []
    tris = []
    norms = []
    uvs = []
    has_uv = all(m.uvs is not None for m in meshes)
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        norms.append(m.normals)
        tris.append(m.triangles + offset)
        if has_uv:
            uvs.append(m.uvs)
        offset += m.n_vertices
    return Mesh(
        vertices=np.vstack(verts),
        triangles=np.vstack(tris) if tris else np.zeros((0, 3), np.int32),
        normals=np.vstack(norms),
        uvs=np.vstack(uvs) if has_uv else None,
    )


def empty_mesh() -> Mesh:
    return Mesh(
        vertices=np.zeros((0, 3)),
        triangles=np.zeros((0, 3), np.int32),
        normals=np.zeros((0, 3)),
        uvs=np.zeros((0, 2)),
    )


@dataclass(frozen=True)
class OrientedBox:
    """Minimum-area rotated rectangle; yaw in [0, pi), extents are half sizes."""

    center: np.ndarray  # (2,)
    yaw: float
    extents: tuple[float, float]  # (half_w, half_l)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))

    @property
    def width(self) -> float:
        return 2.0 * self.extents[0]

    @property
    def length(self) -> float:
        return 2.0 * self.extents[1]

    def area(self) -> float:
        return self.width * self.length

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        ax, ay = self.axes()
        hw, hl = self.extents
        return np.array(
            [
                self.center + sx * hw * ax + sy * hl * ay
                for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))
            ]
        )

    def contains(self, points: np.ndarray, slack: float = 1e-6) -> np.ndarray:
        ax, ay = self.axes()
        rel = np.atleast_2d(points) - self.center
        u = rel @ ax
        v = rel @ ay
        return (np.abs(u) <= self.extents[0] + slack) & (np.abs(v) <= self.extents[1] + slack)


@dataclass(frozen=True)
class SimilarityPlacement:
    """Planar similarity plus independent vertical scale.

    Maps local points p to R_z(yaw) * diag(xy_scale, xy_scale, z_scale) * p
    + translation.
    """

    translation: np.ndarray  # (3,)
    yaw: float = 0.0
    xy_scale: float = 1.0
    z_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))
        if not (
            math.isfinite(self.xy_scale)
            and math.isfinite(self.z_scale)
            and self.xy_scale > 0
            and self.z_scale > 0
        ):
            raise ValueError("scales must be finite and positive")

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        m = np.eye(4)
        m[:3, :3] = np.array(
            [
                [c * self.xy_scale, -s * self.xy_scale, 0.0],
                [s * self.xy_scale, c * self.xy_scale, 0.0],
                [0.0, 0.0, self.z_scale],
            ]
        )
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        m = self.matrix()
        return np.atleast_2d(points) @ m[:3, :3].T + m[:3, 3]


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3)

    def __post_init__(self):
        object.__setattr__(
            self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        )

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SilhouetteMask:
    bits: np.ndarray  # (res, res) bool
    resolution: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.resolution, self.resolution):
            raise ValueError("bits shape must match resolution")
        object.__setattr__(self, "bits", bits)

    def filled_fraction(self) -> float:
        return float(self.bits.mean()) if self.bits.size else 0.0


# -- extrusion -------------------------------------------------------------------


def _cap_triangles(rings: list[np.ndarray]) -> list[tuple[int, int, int]]:
    tris = earcut.triangulate([r.tolist() for r in rings])
    if not tris:
        raise InvalidPolygon("cap triangulation produced no triangles")
    return tris


def extrude_footprint(fp: FootprintPolygon, height: float) -> Mesh:
    """Extrude a footprint into a closed prism (caps + quad walls)."""
    if height <= 0:
        raise ZeroHeight(f"extrusion height must be > 0, got {height}")
    if ring_area(fp.outer) <= 0:
        raise InvalidPolygon("outer ring must be CCW with positive area")
    for hole in fp.holes:
        if ring_area(hole) >= 0:
            raise InvalidPolygon("hole rings must be CW with negative area")

    rings = [fp.outer] + list(fp.holes)
    base = np.vstack(rings)
    n = len(base)
    bottom = np.column_stack([base, np.zeros(n)])
    top = np.column_stack([base, np.full(n, float(height))])
    vertices = np.vstack([bottom, top])

    cap = _cap_triangles(rings)
    tris: list[tuple[int, int, int]] = []
    tris.extend((a, c, b) for a, b, c in cap)  # bottom, facing -z
    tris.extend((a + n, b + n, c + n) for a, b, c in cap)  # top, facing +z

    offset = 0
    for ring in rings:
        m = len(ring)
        for i in range(m):
            a = offset + i
            b = offset + (i + 1) % m
            tris.append((a, b, b + n))
            tris.append((a, b + n, a + n))
        offset += m

    triangles = np.array(tris, dtype=np.int32)
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        normals=_vertex_normals(vertices, triangles),
    )
    return _drop_degenerate(mesh)


def _drop_degenerate(mesh: Mesh) -> Mesh:
    areas = mesh.triangle_areas()
    keep = areas > MIN_TRIANGLE_AREA
    if keep.all():
        return mesh
    return Mesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles[keep],
        normals=mesh.normals,
        uvs=mesh.uvs,
    )


def _vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    normals = np.zeros_like(vertices)
    if len(triangles):
        a, b, c = (vertices[triangles[:, k]] for k in range(3))
        face = np.cross(b - a, c - a)  # area-weighted
        for k in range(3):
            np.add.at(normals, triangles[:, k], face)
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    fallback = np.zeros_like(normals)
    fallback[:, 2] = 1.0
    return np.where(lens > 1e-20, normals / np.maximum(lens, 1e-300), fallback)


def box_mesh(width: float = 1.0, length: float = 1.0, height: float = 1.0) -> Mesh:
    """Axis-aligned box centered in XY with its base at z=0."""
    hw, hl = width / 2.0, length / 2.0
    v = np.array(
        [
            [-hw, -hl, 0], [hw, -hl, 0], [hw, hl, 0], [-hw, hl, 0],
            [-hw, -hl, height], [hw, -hl, height], [hw, hl, height], [-hw, hl, height],
        ],
        dtype=np.float64,
    )
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],
            [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ],
        dtype=np.int32,
    )
    return Mesh(vertices=v, triangles=t, normals=_vertex_normals(v, t))


# -- oriented bounding box ----------------------------------------------------


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, CCW; degenerates to <=2 points."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                ax, ay = chain[-1] - chain[-2]
                bx, by = p - chain[-2]
                if ax * by - ay * bx > 0:
                    break
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull if len(hull) >= 3 else pts


def compute_obb(points: np.ndarray) -> OrientedBox:
    """Minimum-area oriented rectangle via a caliper sweep over hull edges."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyInput("need at least one point")
    hull = convex_hull_2d(pts)
    if len(hull) == 1:
        return OrientedBox(center=hull[0], yaw=0.0, extents=(0.0, 0.0))
    if len(hull) == 2:
        seg = hull[1] - hull[0]
        length = float(np.linalg.norm(seg))
        yaw = math.atan2(seg[1], seg[0]) % math.pi
        return OrientedBox(center=(hull[0] + hull[1]) / 2, yaw=yaw, extents=(length / 2, 0.0))

    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.arctan2(edges[:, 1], edges[:, 0]) % (math.pi / 2)
    angles = np.unique(angles)
    cos, sin = np.cos(angles), np.sin(angles)
    # rotate hull into each candidate frame at once: (k, n) projections
    xs = cos[:, None] * hull[None, :, 0] + sin[:, None] * hull[None, :, 1]
    ys = -sin[:, None] * hull[None, :, 0] + cos[:, None] * hull[None, :, 1]
    w = xs.max(axis=1) - xs.min(axis=1)
    l = ys.max(axis=1) - ys.min(axis=1)
    k = int(np.argmin(w * l))

    cx = (xs[k].max() + xs[k].min()) / 2
    cy = (ys[k].max() + ys[k].min()) / 2
    center = np.array(
        [cos[k] * cx - sin[k] * cy, sin[k] * cx + cos[k] * cy]
    )
    yaw = float(angles[k] % math.pi)
    half_w = float(w[k] / 2)
    half_l = float(l[k] / 2)
    if yaw >= math.pi:
        yaw -= math.pi
    return OrientedBox(center=center, yaw=yaw, extents=(half_w, half_l))


# -- placement fitting ---------------------------------------------------------


@dataclass(frozen=True)
class Box3:
    """Axis-aligned 3D bounds of an asset in its local frame."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64).reshape(3))

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min

    @property
    def base_center(self) -> np.ndarray:
        c = (self.min + self.max) / 2
        return np.array([c[0], c[1], self.min[2]])


def fit_placement(asset_bounds: Box3, instance) -> SimilarityPlacement:
    """Similarity transform placing an asset into a building instance's OBB.

    Uniform in-plane scale is the fit-inside ratio (asset never overflows the
    OBB); vertical scale matches the instance target height exactly.
    """
    size = asset_bounds.size
    if (size <= 0).any():
        raise DegenerateAsset(f"asset bounds have non-positive extents {size}")
    obb = instance.obb
    if obb.extents[0] <= 0 or obb.extents[1] <= 0:
        raise DegenerateOBB(f"instance OBB extents {obb.extents} are degenerate")
    if instance.target_height <= 0:
        raise DegenerateOBB(f"instance target height {instance.target_height} is degenerate")

    xy_scale = min(obb.width / size[0], obb.length / size[1])
    z_scale = instance.target_height / size[2]
    yaw = obb.yaw
    c, s = math.cos(yaw), math.sin(yaw)
    base = asset_bounds.base_center
    rotated = np.array(
        [
            c * base[0] * xy_scale - s * base[1] * xy_scale,
            s * base[0] * xy_scale + c * base[1] * xy_scale,
            base[2] * z_scale,
        ]
    )
    translation = np.array([obb.center[0], obb.center[1], 0.0]) - rotated
    return SimilarityPlacement(
        translation=translation, yaw=yaw, xy_scale=xy_scale, z_scale=z_scale
    )


# -- surface sampling ------------------------------------------------------------


def sample_mesh_surface(mesh: Mesh, n: int, seed: int = 0) -> PointCloud:
    """Area-uniform surface samples; deterministic per seed."""
    if mesh.is_empty():
        raise EmptyMesh("cannot sample an empty mesh")
    if n < 0:
        raise ValueError("sample count must be >= 0")
    if n == 0:
        return PointCloud(points=np.zeros((0, 3)))
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise EmptyMesh("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas) / total
    tri_idx = np.searchsorted(cdf, rng.random(n), side="right").clip(0, len(areas) - 1)
    a = mesh.vertices[mesh.triangles[tri_idx, 0]]
    b = mesh.vertices[mesh.triangles[tri_idx, 1]]
    c = mesh.vertices[mesh.triangles[tri_idx, 2]]
    u = np.sqrt(rng.random((n, 1)))
    v = rng.random((n, 1))
    points = (1 - u) * a + u * (1 - v) * b + u * v * c
    return PointCloud(points=points)


# -- isometric silhouette ----------------------------------------------------------


def iso_camera_axes() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(right, up, view_dir) of the fixed isometric orthographic camera."""
    ca, sa = math.cos(ISO_AZIMUTH), math.sin(ISO_AZIMUTH)
    ce, se = math.cos(ISO_ELEVATION), math.sin(ISO_ELEVATION)
    view = -np.array([ce * ca, ce * sa, se])
    right = np.cross(view, np.array([0.0, 0.0, 1.0]))
    right /= np.linalg.norm(right)
    up = np.cross(right, view)
    up /= np.linalg.norm(up)
    return right, up, view


def project_iso(vertices: np.ndarray, resolution: int) -> np.ndarray:
    """Project vertices with the fixed camera, fitted to frame with 5% margin."""
    right, up, _ = iso_camera_axes()
    xy = np.column_stack([vertices @ right, vertices @ up])
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    span = max(span, 1e-12) * (1.0 + 2.0 * ISO_MARGIN)
    center = (lo + hi) / 2
    scale = resolution / span
    out = (xy - center) * scale + resolution / 2.0
    out[:, 1] = resolution - out[:, 1]  # raster rows grow downward
    return out


def render_iso_silhouette(mesh: Mesh, resolution: int = 256) -> SilhouetteMask:
    """Binary orthographic rasterization from the fixed isometric camera.

    A pixel is filled when its center lies inside or on any projected
    triangle (either winding).
    """
    if mesh.is_empty():
        raise EmptyMesh("cannot render an empty mesh")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    pts = project_iso(mesh.vertices, resolution)
    bits = np.zeros((resolution, resolution), dtype=bool)
    for t0, t1, t2 in mesh.triangles:
        ax, ay = pts[t0]
        bx, by = pts[t1]
        cx, cy = pts[t2]
        x0 = max(0, int(math.floor(min(ax, bx, cx) - 0.5)))
        x1 = min(resolution - 1, int(math.ceil(max(ax, bx, cx))))
        y0 = max(0, int(math.floor(min(ay, by, cy) - 0.5)))
        y1 = min(resolution - 1, int(math.ceil(max(ay, by, cy))))
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
        py = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
        gx, gy = np.meshgrid(px, py)
        e0 = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        e1 = (cx - bx) * (gy - by) - (cy - by) * (gx - bx)
        e2 = (ax - cx) * (gy - cy) - (ay - cy) * (gx - cx)
        inside = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
        bits[y0 : y1 + 1, x0 : x1 + 1] |= inside
    return SilhouetteMask(bits=bits, resolution=resolution)


def silhouette_iou(a: SilhouetteMask, b: SilhouetteMask) -> float:
    """Intersection over union; defined as 1.0 when both masks are empty."""
    if a.resolution != b.resolution:
        raise ResolutionMismatch(f"{a.resolution} vs {b.resolution}")
    inter = int((a.bits & b.bits).sum())
    union = int((a.bits | b.bits).sum())
    if union == 0:
        return 1.0
    return inter / union


# -- layer triangulation -----------------------------------------------------------


def _pixel_quads(local_mask: np.ndarray, mpp: float) -> Mesh:
    """Exact two-triangles-per-pixel fallback."""
    rows, cols = np.nonzero(local_mask)
    verts = []
    tris = []
    for k, (r, c) in enumerate(zip(rows.tolist(), cols.tolist())):
        i = 4 * k
        verts.extend(
            [
                (c * mpp, r * mpp, 0.0),
                ((c + 1) * mpp, r * mpp, 0.0),
                ((c + 1) * mpp, (r + 1) * mpp, 0.0),
                (c * mpp, (r + 1) * mpp, 0.0),
            ]
        )
        tris.extend([(i, i + 1, i + 2), (i, i + 2, i + 3)])
    vertices = np.array(verts, dtype=np.float64)
    return Mesh(
        vertices=vertices,
        triangles=np.array(tris, dtype=np.int32),
        normals=np.tile([0.0, 0.0, 1.0], (len(vertices), 1)),
        uvs=vertices[:, :2].copy(),
    )


def triangulate_layer_mask(mask: np.ndarray, meters_per_pixel: float) -> Mesh:
    """Planar z=0 mesh covering exactly the mask region.

    Boundaries follow pixel edges with collinear collapse only, so per-region
    polygon area equals the pixel area; a per-pixel fallback guards the rare
    triangulation failure.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return empty_mesh()
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    slices = ndimage.find_objects(labels)
    pieces: list[Mesh] = []
    mpp = float(meters_per_pixel)
    for lab in range(1, n + 1):
        sl = slices[lab - 1]
        local = labels[sl] == lab
        rings = [_collapse_collinear(r) for r in trace_region_rings(local)]
        outer = [r for r in rings if ring_area(r) > 0]
        holes = [r for r in rings if ring_area(r) < 0]
        assert len(outer) == 1
        ordered = [outer[0]] + holes
        tris = earcut.triangulate([r.tolist() for r in ordered])
        flat = np.vstack(ordered)
        tri_arr = np.array(tris, dtype=np.int32) if tris else np.zeros((0, 3), np.int32)
        target_area = float(local.sum())
        if tri_arr.size:
            a, b, c = (flat[tri_arr[:, k]] for k in range(3))
            got = float(
                np.abs(
                    0.5
                    * (
                        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                        - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
                    )
                ).sum()
            )
        else:
            got = 0.0
        offset = np.array([sl[1].start, sl[0].start], dtype=np.float64)
        if abs(got - target_area) > 0.005 * target_area:
            piece = _pixel_quads(local, mpp)
            piece = Mesh(
                vertices=piece.vertices + np.array([offset[0] * mpp, offset[1] * mpp, 0.0]),
                triangles=piece.triangles,
                normals=piece.normals,
                uvs=piece.uvs + offset * mpp,
            )
        else:
            verts2d = (flat + offset) * mpp
            vertices = np.column_stack([verts2d, np.zeros(len(verts2d))])
            piece = Mesh(
                vertices=vertices,
                triangles=tri_arr,
                normals=np.tile([0.0, 0.0, 1.0], (len(vertices), 1)),
                uvs=verts2d.copy(),
            )
        pieces.append(_drop_degenerate(piece))
    return merge_meshes(pieces)
