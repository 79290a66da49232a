"""The editable scene document: layers, instances, materials, skybox.

Documents serialize to canonical JSON ("majutsu-scene/1"): sorted keys, no
whitespace, floats in shortest round-trip form, mesh arrays as little-endian
base64 chunks. save -> load -> save is byte-stable and load(save(doc))
reproduces every field exactly.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    MaterialMissing,
    MissingAsset,
    SchemaViolation,
    SerializationFailure,
    UnknownVersion,
)
from .geometry import Mesh, SimilarityPlacement, fit_placement, triangulate_layer_mask
from .layout import BuildingInstance, HeightMap, LayoutMap, SemanticClass
from .placement import KIND_STREETLIGHT, KIND_TREE, PlacementPoint

FORMAT_VERSION = "majutsu-scene/1"

LAYER_KINDS = ("ground", "road", "water", "vegetation")
_LAYER_CLASS = {
    "ground": SemanticClass.GROUND,
    "road": SemanticClass.ROAD,
    "water": SemanticClass.WATER,
    "vegetation": SemanticClass.VEGETATION,
}

CATEGORY_BUILDING = "building"
CATEGORY_TREE = "tree"
CATEGORY_STREETLIGHT = "streetlight"

PBR_MAP_KINDS = ("base_color", "normal", "roughness", "metallic", "ambient_occlusion")


@dataclass(frozen=True)
class MaterialDef:
    id: str
    base_color: str
    normal: str
    roughness: str
    metallic: str
    ambient_occlusion: str
    uv_tiling: float = 0.25  # texture repeats per meter

    def __post_init__(self):
        for kind in PBR_MAP_KINDS:
            if not getattr(self, kind):
                raise ValueError(f"material {self.id!r} missing {kind} map")
        if self.uv_tiling <= 0:
            raise ValueError("uv_tiling must be > 0")

    def maps(self) -> dict[str, str]:
        return {kind: getattr(self, kind) for kind in PBR_MAP_KINDS}


@dataclass(frozen=True)
class SkyboxDef:
    id: str
    hdr_ref: str
    rotation: float = 0.0

    def __post_init__(self):
        if not self.hdr_ref:
            raise ValueError("skybox hdr_ref must be nonempty")


@dataclass(frozen=True)
class Layer:
    kind: str
    mesh: Mesh
    material_id: str


@dataclass(frozen=True)
class AssetInstance:
    id: str
    asset_ref: str
    category: str
    placement: SimilarityPlacement
    attribute_overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SceneDocument:
    metadata: dict
    layers: tuple[Layer, ...]  # exactly four, in LAYER_KINDS order
    materials: dict[str, MaterialDef]
    instances: tuple[AssetInstance, ...]
    skybox: SkyboxDef
    revision: int = 1
    edit_log: tuple[dict, ...] = ()
    asset_meshes: dict[str, Mesh] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(l.kind for l in self.layers) != LAYER_KINDS:
            raise ValueError(f"document needs the four layers {LAYER_KINDS} in order")
        ids = [i.id for i in self.instances]
        if len(ids) != len(set(ids)):
            raise ValueError("instance ids must be unique")

    def layer(self, kind: str) -> Layer:
        return self.layers[LAYER_KINDS.index(kind)]

    def instance(self, instance_id: str) -> AssetInstance | None:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        return None

    def map_size_m(self) -> tuple[float, float]:
        mpp = self.metadata["meters_per_pixel"]
        return (
            self.metadata["width_px"] * mpp,
            self.metadata["height_px"] * mpp,
        )


def stable_yaw(seed: int, x: float, y: float) -> float:
    """Deterministic per-point yaw derived from a hash of the position."""
    digest = hashlib.sha256(struct.pack("<qdd", seed, x, y)).digest()
    return int.from_bytes(digest[:8], "little") / 2**64 * 2.0 * math.pi


# -- assembly -------------------------------------------------------------------


def assemble_scene(
    layout: LayoutMap,
    hmap: HeightMap,
    instances: list[BuildingInstance],
    assets: dict[str, str],
    placements: list[PlacementPoint],
    materials: dict[str, MaterialDef],
    skybox: SkyboxDef,
    asset_meshes: dict[str, Mesh] | None = None,
    prop_assets: dict[str, str] | None = None,
    extra_materials: list[MaterialDef] | None = None,
    seed: int = 0,
    name: str = "scene",
) -> SceneDocument:
    """Build the object-level scene from validated pipeline intermediates.

    One layer per surface class bound to its material, one AssetInstance per
    building (similarity-fitted into its OBB) and per placement point (unit
    scale, hashed yaw), plus the skybox. Revision starts at 1.
    """
    asset_meshes = dict(asset_meshes or {})
    prop_assets = prop_assets or {
        KIND_TREE: "tree_default",
        KIND_STREETLIGHT: "streetlight_default",
    }

    layers = []
    for kind in LAYER_KINDS:
        if kind not in materials:
            raise MaterialMissing(kind)
        mesh = triangulate_layer_mask(layout.mask(_LAYER_CLASS[kind]), layout.meters_per_pixel)
        layers.append(Layer(kind=kind, mesh=mesh, material_id=materials[kind].id))

    doc_instances: list[AssetInstance] = []
    for inst in instances:
        if inst.id not in assets:
            raise MissingAsset(inst.id)
        ref = assets[inst.id]
        if ref not in asset_meshes:
            raise MissingAsset(inst.id)
        mesh = asset_meshes[ref]
        lo, hi = mesh.bounds()
        from .geometry import Box3

        placement = fit_placement(Box3(min=lo, max=hi), inst)
        doc_instances.append(
            AssetInstance(
                id=inst.id,
                asset_ref=ref,
                category=CATEGORY_BUILDING,
                placement=placement,
                attribute_overrides={},
            )
        )

    counters = {KIND_TREE: 0, KIND_STREETLIGHT: 0}
    prefixes = {KIND_TREE: "tree", KIND_STREETLIGHT: "lamp"}
    for point in placements:
        kind = point.kind
        idx = counters[kind]
        counters[kind] += 1
        x, y = point.position
        doc_instances.append(
            AssetInstance(
                id=f"{prefixes[kind]}_{idx:04d}",
                asset_ref=prop_assets[kind],
                category=CATEGORY_TREE if kind == KIND_TREE else CATEGORY_STREETLIGHT,
                placement=SimilarityPlacement(
                    translation=np.array([x, y, 0.0]),
                    yaw=stable_yaw(seed, x, y),
                    xy_scale=1.0,
                    z_scale=1.0,
                ),
                attribute_overrides={"source": point.source},
            )
        )

    material_table = {m.id: m for m in materials.values()}
    for extra in extra_materials or []:
        material_table.setdefault(extra.id, extra)

    metadata = {
        "name": name,
        "seed": seed,
        "meters_per_pixel": layout.meters_per_pixel,
        "width_px": layout.width,
        "height_px": layout.height,
        "layout_sha256": hashlib.sha256(layout.cells.tobytes()).hexdigest(),
        "height_sha256": hashlib.sha256(hmap.heights.tobytes()).hexdigest(),
    }
    return SceneDocument(
        metadata=metadata,
        layers=tuple(layers),
        materials=material_table,
        instances=tuple(doc_instances),
        skybox=skybox,
        revision=1,
        edit_log=(),
        asset_meshes=asset_meshes,
    )


# -- serialization ----------------------------------------------------------------


def _encode_array(arr: np.ndarray, dtype: str) -> dict:
    data = np.ascontiguousarray(arr.astype(np.dtype(dtype), copy=False))
    return {
        "dtype": dtype,
        "shape": list(data.shape),
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict, path: str) -> np.ndarray:
    for key in ("dtype", "shape", "data"):
        if not isinstance(obj, dict) or key not in obj:
            raise SchemaViolation(f"{path}.{key}")
    try:
        raw = base64.b64decode(obj["data"].encode("ascii"), validate=True)
        arr = np.frombuffer(raw, dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
    except Exception as exc:
        raise SchemaViolation(path, str(exc)) from exc
    return arr.copy()


def _mesh_to_dict(mesh: Mesh) -> dict:
    out = {
        "vertices": _encode_array(mesh.vertices, "<f8"),
        "triangles": _encode_array(mesh.triangles, "<i4"),
        "normals": _encode_array(mesh.normals, "<f8"),
    }
    if mesh.uvs is not None:
        out["uvs"] = _encode_array(mesh.uvs, "<f8")
    return out


def _mesh_from_dict(obj: dict, path: str) -> Mesh:
    for key in ("vertices", "triangles", "normals"):
        if key not in obj:
            raise SchemaViolation(f"{path}.{key}")
    return Mesh(
        vertices=_decode_array(obj["vertices"], f"{path}.vertices"),
        triangles=_decode_array(obj["triangles"], f"{path}.triangles"),
        normals=_decode_array(obj["normals"], f"{path}.normals"),
        uvs=_decode_array(obj["uvs"], f"{path}.uvs") if "uvs" in obj else None,
    )


def _placement_to_dict(p: SimilarityPlacement) -> dict:
    return {
        "translation": [float(v) for v in p.translation],
        "yaw": float(p.yaw),
        "xy_scale": float(p.xy_scale),
        "z_scale": float(p.z_scale),
    }


def placement_from_dict(obj: dict, path: str = "placement") -> SimilarityPlacement:
    if not isinstance(obj, dict):
        raise SchemaViolation(path)
    for key in ("translation", "yaw", "xy_scale", "z_scale"):
        if key not in obj:
            raise SchemaViolation(f"{path}.{key}")
    return SimilarityPlacement(
        translation=np.array(obj["translation"], dtype=np.float64),
        yaw=float(obj["yaw"]),
        xy_scale=float(obj["xy_scale"]),
        z_scale=float(obj["z_scale"]),
    )


def _instance_to_dict(inst: AssetInstance) -> dict:
    return {
        "id": inst.id,
        "asset_ref": inst.asset_ref,
        "category": inst.category,
        "placement": _placement_to_dict(inst.placement),
        "attribute_overrides": dict(sorted(inst.attribute_overrides.items())),
    }


def _instance_from_dict(obj: dict, path: str) -> AssetInstance:
    for key in ("id", "asset_ref", "category", "placement"):
        if key not in obj:
            raise SchemaViolation(f"{path}.{key}")
    return AssetInstance(
        id=obj["id"],
        asset_ref=obj["asset_ref"],
        category=obj["category"],
        placement=placement_from_dict(obj["placement"], f"{path}.placement"),
        attribute_overrides=dict(obj.get("attribute_overrides", {})),
    )


def doc_to_dict(doc: SceneDocument, include_log: bool = True) -> dict:
    data = {
        "version": FORMAT_VERSION,
        "metadata": doc.metadata,
        "layers": [
            {"kind": l.kind, "material": l.material_id, "mesh": _mesh_to_dict(l.mesh)}
            for l in doc.layers
        ],
        "materials": {
            mid: {**m.maps(), "id": m.id, "uv_tiling": m.uv_tiling}
            for mid, m in sorted(doc.materials.items())
        },
        "instances": [_instance_to_dict(i) for i in doc.instances],
        "skybox": {"id": doc.skybox.id, "hdr_ref": doc.skybox.hdr_ref, "rotation": doc.skybox.rotation},
        "asset_meshes": {
            ref: _mesh_to_dict(m) for ref, m in sorted(doc.asset_meshes.items())
        },
    }
    if include_log:
        data["revision"] = doc.revision
        data["edit_log"] = [dict(e) for e in doc.edit_log]
    return data


def save_document(doc: SceneDocument) -> bytes:
    """Canonical JSON bytes of the document."""
    try:
        return json.dumps(
            doc_to_dict(doc), sort_keys=True, separators=(",", ":"), allow_nan=False
        ).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise SerializationFailure(str(exc)) from exc


def content_bytes(doc: SceneDocument) -> bytes:
    """Canonical bytes excluding revision and edit_log (content equality)."""
    return json.dumps(
        doc_to_dict(doc, include_log=False),
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")


def content_equal(a: SceneDocument, b: SceneDocument) -> bool:
    return content_bytes(a) == content_bytes(b)


def load_document(data: bytes) -> SceneDocument:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation("$", f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation("$")
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise UnknownVersion(f"unsupported document version {version!r}")
    for key in ("metadata", "layers", "materials", "instances", "skybox", "revision", "edit_log"):
        if key not in obj:
            raise SchemaViolation(f"$.{key}")

    layers = []
    if not isinstance(obj["layers"], list) or len(obj["layers"]) != 4:
        raise SchemaViolation("layers", "expected exactly four layers")
    for i, lobj in enumerate(obj["layers"]):
        for key in ("kind", "material", "mesh"):
            if key not in lobj:
                raise SchemaViolation(f"layers[{i}].{key}")
        layers.append(
            Layer(
                kind=lobj["kind"],
                mesh=_mesh_from_dict(lobj["mesh"], f"layers[{i}].mesh"),
                material_id=lobj["material"],
            )
        )

    materials = {}
    for mid, mobj in obj["materials"].items():
        for kind in PBR_MAP_KINDS:
            if kind not in mobj:
                raise SchemaViolation(f"materials.{mid}.{kind}")
        materials[mid] = MaterialDef(
            id=mobj.get("id", mid),
            uv_tiling=float(mobj.get("uv_tiling", 1.0)),
            **{kind: mobj[kind] for kind in PBR_MAP_KINDS},
        )

    instances = []
    for i, iobj in enumerate(obj["instances"]):
        instances.append(_instance_from_dict(iobj, f"instances[{i}]"))

    sobj = obj["skybox"]
    for key in ("id", "hdr_ref"):
        if key not in sobj:
            raise SchemaViolation(f"skybox.{key}")
    skybox = SkyboxDef(id=sobj["id"], hdr_ref=sobj["hdr_ref"], rotation=float(sobj.get("rotation", 0.0)))

    asset_meshes = {
        ref: _mesh_from_dict(mobj, f"asset_meshes.{ref}")
        for ref, mobj in obj.get("asset_meshes", {}).items()
    }

    return SceneDocument(
        metadata=obj["metadata"],
        layers=tuple(layers),
        materials=materials,
        instances=tuple(instances),
        skybox=skybox,
        revision=int(obj["revision"]),
        edit_log=tuple(obj["edit_log"]),
        asset_meshes=asset_meshes,
    )


def with_fields(doc: SceneDocument, **kwargs) -> SceneDocument:
    """Structural-sharing update helper."""
    return replace(doc, **kwargs)
