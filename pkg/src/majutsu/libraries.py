"""Asset / material / skybox libraries: manifest ingest and a built-in set.

Manifests are JSON files (assets.json, materials.json, skyboxes.json) with
URIs relative to the library root. Ingest validates ids, resolvability, the
five PBR maps per material, and each asset's declared bounds against its
mesh AABB (warning + correction on drift beyond 1e-3).
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DanglingURI, DuplicateId, MissingMap
from .geometry import Mesh, _vertex_normals, box_mesh, merge_meshes
from .scene import PBR_MAP_KINDS, MaterialDef, SkyboxDef

logger = logging.getLogger(__name__)

STYLES = (
    "modern",
    "cyberpunk",
    "ghibli",
    "minecraft",
    "netherlands",
    "gothic",
    "industrial",
    "futuristic",
    "mediterranean",
    "artdeco",
)

LAYER_MATERIAL_TAGS = {
    "ground": "concrete",
    "road": "asphalt",
    "water": "water",
    "vegetation": "grass",
}


@dataclass(frozen=True)
class AssetEntry:
    id: str
    mesh_uri: str
    style: str
    building_type: str
    category: str  # building | tree | streetlight
    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]

    @property
    def size(self) -> tuple[float, float, float]:
        return tuple(b - a for a, b in zip(self.bounds_min, self.bounds_max))

    def aspect(self) -> float:
        w, l, _ = self.size
        lo, hi = sorted((abs(w), abs(l)))
        return hi / lo if lo > 1e-12 else math.inf


@dataclass(frozen=True)
class MaterialEntry:
    material: MaterialDef
    tags: tuple[str, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class SkyboxEntry:
    skybox: SkyboxDef
    tags: tuple[str, ...] = ()
    description: str = ""


@dataclass
class AssetLibrary:
    root: Path
    entries: list[AssetEntry] = field(default_factory=list)

    def by_style(self, style: str) -> list[AssetEntry]:
        return [e for e in self.entries if e.style == style]

    def by_category(self, category: str) -> list[AssetEntry]:
        return [e for e in self.entries if e.category == category]

    def get(self, asset_id: str) -> AssetEntry | None:
        for e in self.entries:
            if e.id == asset_id:
                return e
        return None

    def load_mesh(self, asset_id: str) -> Mesh:
        entry = self.get(asset_id)
        if entry is None:
            raise KeyError(asset_id)
        return load_mesh_file(self.root / entry.mesh_uri)


@dataclass
class MaterialLibrary:
    root: Path
    entries: list[MaterialEntry] = field(default_factory=list)

    def by_tag(self, tag: str) -> list[MaterialEntry]:
        return [e for e in self.entries if tag in e.tags]

    def get(self, material_id: str) -> MaterialEntry | None:
        for e in self.entries:
            if e.material.id == material_id:
                return e
        return None


@dataclass
class SkyboxLibrary:
    root: Path
    entries: list[SkyboxEntry] = field(default_factory=list)

    def get(self, skybox_id: str) -> SkyboxEntry | None:
        for e in self.entries:
            if e.skybox.id == skybox_id:
                return e
        return None


# -- mesh file IO -----------------------------------------------------------------


def write_obj(mesh: Mesh, path: Path):
    lines = ["# majutsu asset"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    path.write_text("\n".join(lines) + "\n")


def load_obj(path: Path) -> Mesh:
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            for k in range(1, len(idx) - 1):  # fan-triangulate
                tris.append([idx[0], idx[k], idx[k + 1]])
    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    triangles = np.array(tris, dtype=np.int32).reshape(-1, 3)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        normals=_vertex_normals(vertices, triangles),
    )


def load_mesh_file(path: Path) -> Mesh:
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return load_obj(path)
    if suffix == ".glb":
        from .gltf import parse_glb

        gltf, blob = parse_glb(path.read_bytes())
        meshes = []
        for gm in gltf.get("meshes", []):
            for prim in gm.get("primitives", []):
                acc = gltf["accessors"][prim["attributes"]["POSITION"]]
                view = gltf["bufferViews"][acc["bufferView"]]
                start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
                pos = np.frombuffer(
                    blob, dtype="<f4", count=acc["count"] * 3, offset=start
                ).reshape(-1, 3).astype(np.float64)
                iacc = gltf["accessors"][prim["indices"]]
                iview = gltf["bufferViews"][iacc["bufferView"]]
                istart = iview.get("byteOffset", 0) + iacc.get("byteOffset", 0)
                dtype = {5125: "<u4", 5123: "<u2", 5121: "<u1"}[iacc["componentType"]]
                idx = np.frombuffer(blob, dtype=dtype, count=iacc["count"], offset=istart)
                tris = idx.astype(np.int32).reshape(-1, 3)
                meshes.append(
                    Mesh(vertices=pos, triangles=tris, normals=_vertex_normals(pos, tris))
                )
        return merge_meshes(meshes)
    raise ValueError(f"unsupported mesh format: {path.suffix}")


# -- ingest -----------------------------------------------------------------------


def _check_unique(ids: list[str], what: str):
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate {what} id {i!r}")
        seen.add(i)


def _resolve(root: Path, uri: str, owner: str) -> Path:
    path = root / uri
    if not path.is_file():
        raise DanglingURI(f"{owner}: file {uri!r} not found under {root}")
    return path


def ingest_libraries(root: Path | str) -> tuple[AssetLibrary, MaterialLibrary, SkyboxLibrary]:
    """Load and validate assets.json / materials.json / skyboxes.json."""
    root = Path(root)
    assets_manifest = json.loads((root / "assets.json").read_text())
    materials_manifest = json.loads((root / "materials.json").read_text())
    skyboxes_manifest = json.loads((root / "skyboxes.json").read_text())

    _check_unique([a["id"] for a in assets_manifest], "asset")
    _check_unique([m["id"] for m in materials_manifest], "material")
    _check_unique([s["id"] for s in skyboxes_manifest], "skybox")

    assets = AssetLibrary(root=root)
    for a in assets_manifest:
        mesh_path = _resolve(root, a["mesh"], f"asset {a['id']!r}")
        entry = AssetEntry(
            id=a["id"],
            mesh_uri=a["mesh"],
            style=a.get("style", ""),
            building_type=a.get("building_type", ""),
            category=a.get("category", "building"),
            bounds_min=tuple(a["bounds"]["min"]),
            bounds_max=tuple(a["bounds"]["max"]),
        )
        mesh = load_mesh_file(mesh_path)
        lo, hi = mesh.bounds()
        if (
            np.abs(np.array(entry.bounds_min) - lo).max() > 1e-3
            or np.abs(np.array(entry.bounds_max) - hi).max() > 1e-3
        ):
            logger.warning(
                "asset %s declared bounds drift from mesh AABB; corrected", entry.id
            )
            entry = replace(
                entry,
                bounds_min=tuple(float(v) for v in lo),
                bounds_max=tuple(float(v) for v in hi),
            )
        assets.entries.append(entry)

    materials = MaterialLibrary(root=root)
    for m in materials_manifest:
        maps = m.get("maps", {})
        for kind in PBR_MAP_KINDS:
            if kind not in maps or not maps[kind]:
                raise MissingMap(m["id"], kind)
            _resolve(root, maps[kind], f"material {m['id']!r}")
        materials.entries.append(
            MaterialEntry(
                material=MaterialDef(
                    id=m["id"], uv_tiling=float(m.get("uv_tiling", 0.25)), **maps
                ),
                tags=tuple(m.get("tags", ())),
                description=m.get("description", ""),
            )
        )

    skyboxes = SkyboxLibrary(root=root)
    for s in skyboxes_manifest:
        _resolve(root, s["hdr"], f"skybox {s['id']!r}")
        skyboxes.entries.append(
            SkyboxEntry(
                skybox=SkyboxDef(id=s["id"], hdr_ref=s["hdr"], rotation=float(s.get("rotation", 0.0))),
                tags=tuple(s.get("tags", ())),
                description=s.get("description", ""),
            )
        )
    return assets, materials, skyboxes


# -- built-in offline library --------------------------------------------------------


def _tree_mesh() -> Mesh:
    trunk = box_mesh(0.4, 0.4, 2.0)
    crown_pts = []
    crown_tris = []
    n = 8
    for k in range(n):
        a = 2 * math.pi * k / n
        crown_pts.append([1.4 * math.cos(a), 1.4 * math.sin(a), 2.0])
    crown_pts.append([0.0, 0.0, 6.0])  # apex
    crown_pts.append([0.0, 0.0, 2.0])  # base center
    apex = n
    base = n + 1
    for k in range(n):
        crown_tris.append([k, (k + 1) % n, apex])
        crown_tris.append([(k + 1) % n, k, base])
    pts = np.array(crown_pts)
    tris = np.array(crown_tris, dtype=np.int32)
    crown = Mesh(vertices=pts, triangles=tris, normals=_vertex_normals(pts, tris))
    return merge_meshes([trunk, crown])


def _streetlight_mesh() -> Mesh:
    pole = box_mesh(0.2, 0.2, 7.5)
    head = Mesh(
        vertices=box_mesh(0.8, 0.4, 0.5).vertices + np.array([0.4, 0.0, 7.5]),
        triangles=box_mesh(0.8, 0.4, 0.5).triangles,
        normals=box_mesh(0.8, 0.4, 0.5).normals,
    )
    return merge_meshes([pole, head])


_BUILDING_TYPES = (("tower", 1.0, 1.0), ("slab", 1.0, 2.2), ("block", 1.0, 1.5))


def _style_color(name: str, salt: int = 0) -> tuple[int, int, int]:
    h = abs(hash_stable(f"{name}:{salt}"))
    return (64 + h % 160, 64 + (h // 7) % 160, 64 + (h // 49) % 160)


def hash_stable(text: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def _solid_png(color: tuple[int, int, int], size: int = 8) -> bytes:
    arr = np.zeros((size, size, 3), dtype=np.uint8)
    arr[:] = color
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _sky_png(top: tuple[int, int, int], horizon: tuple[int, int, int]) -> bytes:
    h, w = 64, 128
    rows = np.linspace(0.0, 1.0, h)[:, None, None]
    arr = (np.array(top) * (1 - rows) + np.array(horizon) * rows).astype(np.uint8)
    arr = np.repeat(arr, w, axis=1)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def generate_default_library(root: Path | str, styles: tuple[str, ...] = STYLES) -> Path:
    """Write the built-in offline library (meshes, textures, manifests)."""
    root = Path(root)
    (root / "meshes").mkdir(parents=True, exist_ok=True)
    (root / "textures").mkdir(exist_ok=True)
    (root / "skyboxes").mkdir(exist_ok=True)

    assets = []

    def add_asset(asset_id: str, mesh: Mesh, style: str, btype: str, category: str):
        uri = f"meshes/{asset_id}.obj"
        write_obj(mesh, root / uri)
        lo, hi = mesh.bounds()
        assets.append(
            {
                "id": asset_id,
                "mesh": uri,
                "style": style,
                "building_type": btype,
                "category": category,
                "bounds": {"min": [float(v) for v in lo], "max": [float(v) for v in hi]},
            }
        )

    add_asset("tree_default", _tree_mesh(), "", "tree", "tree")
    add_asset("streetlight_default", _streetlight_mesh(), "", "streetlight", "streetlight")
    for style in styles:
        for btype, w, l in _BUILDING_TYPES:
            mesh = box_mesh(w, l, 1.0)
            add_asset(f"{style}_{btype}", mesh, style, btype, "building")

    materials = []

    def add_material(mat_id: str, tags: list[str], description: str, uv_tiling: float = 0.25):
        maps = {}
        for i, kind in enumerate(PBR_MAP_KINDS):
            uri = f"textures/{mat_id}_{kind}.png"
            (root / uri).write_bytes(_solid_png(_style_color(mat_id, i)))
            maps[kind] = uri
        materials.append(
            {
                "id": mat_id,
                "maps": maps,
                "tags": tags,
                "description": description,
                "uv_tiling": uv_tiling,
            }
        )

    for kind, tag in LAYER_MATERIAL_TAGS.items():
        add_material(f"{tag}_01", [tag, kind, "layer"], f"seamless {tag} for the {kind} layer")
    add_material("asphalt_02", ["asphalt", "road", "layer"], "darker worn asphalt variant", 0.3)
    for style in styles:
        add_material(
            f"facade_{style}", ["facade", style], f"{style} building facade", 0.5
        )

    skyboxes = []
    for sky_id, top, horizon, desc in (
        ("sky_day", (84, 134, 201), (214, 226, 238), "clear midday sky"),
        ("sky_dusk", (52, 48, 96), (236, 130, 86), "warm dusk panorama"),
        ("sky_night", (8, 10, 26), (40, 48, 80), "moonless night sky"),
    ):
        uri = f"skyboxes/{sky_id}.png"
        (root / uri).write_bytes(_sky_png(top, horizon))
        skyboxes.append({"id": sky_id, "hdr": uri, "description": desc, "rotation": 0.0})

    (root / "assets.json").write_text(json.dumps(assets, indent=2, sort_keys=True))
    (root / "materials.json").write_text(json.dumps(materials, indent=2, sort_keys=True))
    (root / "skyboxes.json").write_text(json.dumps(skyboxes, indent=2, sort_keys=True))
    return root
