"""glTF 2.0 binary export of scene documents, plus a reader and validator.

Scene frame (x east, y south, z up) maps to glTF Y-up as
(x, y, z) -> (x, z, -y); a placement yaw becomes a rotation about +Y. Nodes:
one per layer, one per asset instance, one inward-facing sky sphere, so the
node count is always 4 + len(instances) + 1.
"""

from __future__ import annotations

import json
import math
import struct

import numpy as np

from .errors import SerializationFailure
from .geometry import Mesh
from .scene import LAYER_KINDS, SceneDocument

GLB_MAGIC = 0x46546C67  # "glTF"
_CHUNK_JSON = 0x4E4F534A
_CHUNK_BIN = 0x004E4942

_COMPONENT_SIZES = {5120: 1, 5121: 1, 5122: 2, 5123: 2, 5125: 4, 5126: 4}
_TYPE_COUNTS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}

DEFAULT_INSTANCE_MATERIAL = "__instance_default__"
SKY_MATERIAL = "__sky__"


def map_to_gltf(points: np.ndarray) -> np.ndarray:
    out = np.empty_like(points)
    out[:, 0] = points[:, 0]
    out[:, 1] = points[:, 2]
    out[:, 2] = -points[:, 1]
    return out


def yaw_quaternion(yaw: float) -> list[float]:
    return [0.0, math.sin(yaw / 2.0), 0.0, math.cos(yaw / 2.0)]


def uv_sphere(radius: float, n_lat: int = 16, n_lon: int = 24, inward: bool = True) -> Mesh:
    """Sphere in the map frame; inward-facing winding/normals for sky use."""
    verts = []
    uvs = []
    for i in range(n_lat + 1):
        theta = math.pi * i / n_lat
        for j in range(n_lon + 1):
            phi = 2 * math.pi * j / n_lon
            verts.append(
                (
                    radius * math.sin(theta) * math.cos(phi),
                    radius * math.sin(theta) * math.sin(phi),
                    radius * math.cos(theta),
                )
            )
            uvs.append((j / n_lon, i / n_lat))
    tris = []
    stride = n_lon + 1
    for i in range(n_lat):
        for j in range(n_lon):
            a = i * stride + j
            b = a + 1
            c = a + stride
            d = c + 1
            tris.append((a, c, b))
            tris.append((b, c, d))
    vertices = np.array(verts, dtype=np.float64)
    normals = vertices / radius
    triangles = np.array(tris, dtype=np.int32)
    if inward:
        triangles = triangles[:, [0, 2, 1]]
        normals = -normals
    return Mesh(vertices=vertices, triangles=triangles, normals=normals, uvs=np.array(uvs))


class _BufferBuilder:
    def __init__(self):
        self.blob = bytearray()
        self.views: list[dict] = []
        self.accessors: list[dict] = []

    def _add_view(self, data: bytes, target: int | None) -> int:
        while len(self.blob) % 4:
            self.blob.append(0)
        view = {"buffer": 0, "byteOffset": len(self.blob), "byteLength": len(data)}
        if target is not None:
            view["target"] = target
        self.blob.extend(data)
        self.views.append(view)
        return len(self.views) - 1

    def add_f32(self, arr: np.ndarray, acc_type: str, with_minmax: bool = False) -> int:
        data = np.ascontiguousarray(arr.astype("<f4"))
        view = self._add_view(data.tobytes(), target=34962)
        acc = {
            "bufferView": view,
            "componentType": 5126,
            "count": int(data.shape[0]),
            "type": acc_type,
        }
        if with_minmax and data.shape[0]:
            acc["min"] = [float(v) for v in data.min(axis=0)]
            acc["max"] = [float(v) for v in data.max(axis=0)]
        self.accessors.append(acc)
        return len(self.accessors) - 1

    def add_indices(self, arr: np.ndarray) -> int:
        data = np.ascontiguousarray(arr.astype("<u4").ravel())
        view = self._add_view(data.tobytes(), target=34963)
        self.accessors.append(
            {
                "bufferView": view,
                "componentType": 5125,
                "count": int(data.size),
                "type": "SCALAR",
            }
        )
        return len(self.accessors) - 1


def _add_mesh(
    builder: _BufferBuilder,
    meshes: list[dict],
    mesh: Mesh,
    name: str,
    material_index: int,
    uv_scale: float | None,
) -> int | None:
    """Returns the glTF mesh index, or None for an empty mesh."""
    if mesh.is_empty():
        return None
    positions = map_to_gltf(mesh.vertices)
    normals = map_to_gltf(mesh.normals)
    attributes = {
        "POSITION": builder.add_f32(positions, "VEC3", with_minmax=True),
        "NORMAL": builder.add_f32(normals, "VEC3"),
    }
    if mesh.uvs is not None and uv_scale is not None:
        attributes["TEXCOORD_0"] = builder.add_f32(mesh.uvs * uv_scale, "VEC2")
    elif mesh.uvs is not None:
        attributes["TEXCOORD_0"] = builder.add_f32(mesh.uvs, "VEC2")
    primitive = {
        "attributes": attributes,
        "indices": builder.add_indices(mesh.triangles),
        "material": material_index,
        "mode": 4,
    }
    meshes.append({"name": name, "primitives": [primitive]})
    return len(meshes) - 1


def export_gltf(doc: SceneDocument) -> bytes:
    """Serialize the scene document to a self-contained .glb byte string."""
    try:
        return _export(doc)
    except (ValueError, KeyError, struct.error) as exc:
        raise SerializationFailure(str(exc)) from exc


def _export(doc: SceneDocument) -> bytes:
    builder = _BufferBuilder()
    gltf_meshes: list[dict] = []
    images: list[dict] = []
    textures: list[dict] = []
    materials: list[dict] = []
    samplers = [{"wrapS": 10497, "wrapT": 10497}]  # repeat, for seamless tiling

    def add_texture(uri: str) -> int:
        images.append({"uri": uri})
        textures.append({"sampler": 0, "source": len(images) - 1})
        return len(textures) - 1

    material_index: dict[str, int] = {}
    for mid, mat in sorted(doc.materials.items()):
        entry = {
            "name": mid,
            "pbrMetallicRoughness": {
                "baseColorTexture": {"index": add_texture(mat.base_color)},
                # glTF packs roughness in G / metallic in B of one image; the
                # separate metallic map travels in extras for repacking tools
                "metallicRoughnessTexture": {"index": add_texture(mat.roughness)},
                "metallicFactor": 1.0,
                "roughnessFactor": 1.0,
            },
            "normalTexture": {"index": add_texture(mat.normal)},
            "occlusionTexture": {"index": add_texture(mat.ambient_occlusion)},
            "extras": {"metallic_map": mat.metallic, "uv_tiling": mat.uv_tiling},
        }
        materials.append(entry)
        material_index[mid] = len(materials) - 1

    materials.append(
        {
            "name": DEFAULT_INSTANCE_MATERIAL,
            "pbrMetallicRoughness": {
                "baseColorFactor": [0.78, 0.75, 0.7, 1.0],
                "metallicFactor": 0.0,
                "roughnessFactor": 0.85,
            },
        }
    )
    default_material = len(materials) - 1
    materials.append(
        {
            "name": SKY_MATERIAL,
            "pbrMetallicRoughness": {
                "baseColorFactor": [0.0, 0.0, 0.0, 1.0],
                "metallicFactor": 0.0,
                "roughnessFactor": 1.0,
            },
            "emissiveFactor": [1.0, 1.0, 1.0],
            "emissiveTexture": {"index": add_texture(doc.skybox.hdr_ref)},
            "doubleSided": False,
            "extras": {"skybox_id": doc.skybox.id},
        }
    )
    sky_material = len(materials) - 1

    nodes: list[dict] = []
    for layer in doc.layers:
        mat = doc.materials[layer.material_id]
        mesh_index = _add_mesh(
            builder,
            gltf_meshes,
            layer.mesh,
            f"layer:{layer.kind}",
            material_index[layer.material_id],
            uv_scale=mat.uv_tiling,
        )
        node = {"name": f"layer:{layer.kind}"}
        if mesh_index is not None:
            node["mesh"] = mesh_index
        nodes.append(node)

    asset_mesh_index: dict[tuple[str, int], int | None] = {}
    for inst in doc.instances:
        override = inst.attribute_overrides.get("material")
        mat_idx = material_index.get(override, default_material) if override else default_material
        key = (inst.asset_ref, mat_idx)
        if key not in asset_mesh_index:
            mesh = doc.asset_meshes.get(inst.asset_ref)
            if mesh is None:
                mesh = _placeholder_mesh()
            asset_mesh_index[key] = _add_mesh(
                builder, gltf_meshes, mesh, f"asset:{inst.asset_ref}", mat_idx, uv_scale=None
            )
        p = inst.placement
        node = {
            "name": inst.id,
            "translation": [
                float(p.translation[0]),
                float(p.translation[2]),
                float(-p.translation[1]),
            ],
            "rotation": yaw_quaternion(p.yaw),
            "scale": [float(p.xy_scale), float(p.z_scale), float(p.xy_scale)],
            "extras": {"category": inst.category, "asset_ref": inst.asset_ref},
        }
        if asset_mesh_index[key] is not None:
            node["mesh"] = asset_mesh_index[key]
        nodes.append(node)

    width_m, height_m = doc.map_size_m()
    radius = 2.0 * math.hypot(width_m, height_m)
    sky = uv_sphere(radius, inward=True)
    sky_mesh = _add_mesh(builder, gltf_meshes, sky, "sky", sky_material, uv_scale=None)
    nodes.append(
        {
            "name": "sky",
            "mesh": sky_mesh,
            "translation": [width_m / 2.0, 0.0, -height_m / 2.0],
            "rotation": yaw_quaternion(doc.skybox.rotation),
        }
    )

    gltf = {
        "asset": {"version": "2.0", "generator": "majutsu"},
        "scene": 0,
        "scenes": [{"name": doc.metadata.get("name", "scene"), "nodes": list(range(len(nodes)))}],
        "nodes": nodes,
        "meshes": gltf_meshes,
        "materials": materials,
        "samplers": samplers,
        "images": images,
        "textures": textures,
        "accessors": builder.accessors,
        "bufferViews": builder.views,
        "buffers": [{"byteLength": len(builder.blob)}],
    }
    return pack_glb(gltf, bytes(builder.blob))


def _placeholder_mesh() -> Mesh:
    # unit box, base at z=0; stands in for unresolved asset references
    from .geometry import box_mesh

    return box_mesh(1.0, 1.0, 1.0)


def pack_glb(gltf: dict, blob: bytes) -> bytes:
    payload = json.dumps(gltf, sort_keys=True, separators=(",", ":")).encode("utf-8")
    while len(payload) % 4:
        payload += b" "
    bin_chunk = bytes(blob)
    while len(bin_chunk) % 4:
        bin_chunk += b"\x00"
    total = 12 + 8 + len(payload) + 8 + len(bin_chunk)
    out = bytearray()
    out += struct.pack("<III", GLB_MAGIC, 2, total)
    out += struct.pack("<II", len(payload), _CHUNK_JSON)
    out += payload
    out += struct.pack("<II", len(bin_chunk), _CHUNK_BIN)
    out += bin_chunk
    return bytes(out)


def parse_glb(data: bytes) -> tuple[dict, bytes]:
    if len(data) < 12:
        raise ValueError("truncated GLB header")
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != GLB_MAGIC:
        raise ValueError("bad GLB magic")
    if version != 2:
        raise ValueError(f"unsupported GLB version {version}")
    if total != len(data):
        raise ValueError("GLB length field mismatch")
    offset = 12
    gltf = None
    blob = b""
    while offset < len(data):
        length, ctype = struct.unpack_from("<II", data, offset)
        offset += 8
        chunk = data[offset : offset + length]
        offset += length
        if ctype == _CHUNK_JSON:
            gltf = json.loads(chunk.decode("utf-8"))
        elif ctype == _CHUNK_BIN:
            blob = chunk
    if gltf is None:
        raise ValueError("GLB missing JSON chunk")
    return gltf, blob


def validate_gltf(data: bytes) -> list[str]:
    """Structural validation; returns a list of problems (empty => valid)."""
    problems: list[str] = []
    try:
        gltf, blob = parse_glb(data)
    except ValueError as exc:
        return [str(exc)]

    if gltf.get("asset", {}).get("version") != "2.0":
        problems.append("asset.version must be 2.0")
    buffers = gltf.get("buffers", [])
    views = gltf.get("bufferViews", [])
    accessors = gltf.get("accessors", [])
    meshes = gltf.get("meshes", [])
    nodes = gltf.get("nodes", [])
    materials = gltf.get("materials", [])

    if buffers and buffers[0]["byteLength"] > len(blob):
        problems.append("buffer byteLength exceeds BIN chunk")

    for i, view in enumerate(views):
        end = view.get("byteOffset", 0) + view["byteLength"]
        if end > len(blob):
            problems.append(f"bufferViews[{i}] overruns binary blob")

    for i, acc in enumerate(accessors):
        if acc["componentType"] not in _COMPONENT_SIZES:
            problems.append(f"accessors[{i}] bad componentType")
            continue
        if acc["type"] not in _TYPE_COUNTS:
            problems.append(f"accessors[{i}] bad type")
            continue
        view = views[acc["bufferView"]]
        need = (
            acc["count"] * _COMPONENT_SIZES[acc["componentType"]] * _TYPE_COUNTS[acc["type"]]
        )
        if acc.get("byteOffset", 0) + need > view["byteLength"]:
            problems.append(f"accessors[{i}] overruns its bufferView")

    def accessor_data(index: int) -> np.ndarray:
        acc = accessors[index]
        view = views[acc["bufferView"]]
        start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
        dtype = {5126: "<f4", 5125: "<u4", 5123: "<u2", 5121: "<u1"}[acc["componentType"]]
        count = acc["count"] * _TYPE_COUNTS[acc["type"]]
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=start)
        return arr.reshape(acc["count"], _TYPE_COUNTS[acc["type"]])

    for mi, mesh in enumerate(meshes):
        for pi, prim in enumerate(mesh.get("primitives", [])):
            attrs = prim.get("attributes", {})
            if "POSITION" not in attrs:
                problems.append(f"meshes[{mi}].primitives[{pi}] missing POSITION")
                continue
            pos_acc = accessors[attrs["POSITION"]]
            n_verts = pos_acc["count"]
            if "min" not in pos_acc or "max" not in pos_acc:
                problems.append(f"meshes[{mi}] POSITION accessor missing min/max")
            else:
                pos = accessor_data(attrs["POSITION"])
                if pos.size and (
                    not np.allclose(pos.min(axis=0), pos_acc["min"], atol=1e-6)
                    or not np.allclose(pos.max(axis=0), pos_acc["max"], atol=1e-6)
                ):
                    problems.append(f"meshes[{mi}] POSITION min/max incorrect")
            if "indices" in prim:
                idx = accessor_data(prim["indices"])
                if idx.size and idx.max() >= n_verts:
                    problems.append(f"meshes[{mi}].primitives[{pi}] index out of range")
                if idx.size % 3:
                    problems.append(f"meshes[{mi}].primitives[{pi}] index count not triangular")
            if "material" in prim and prim["material"] >= len(materials):
                problems.append(f"meshes[{mi}].primitives[{pi}] bad material index")

    for ni, node in enumerate(nodes):
        if "mesh" in node and node["mesh"] >= len(meshes):
            problems.append(f"nodes[{ni}] references missing mesh")

    for si, scene in enumerate(gltf.get("scenes", [])):
        for idx in scene.get("nodes", []):
            if idx >= len(nodes):
                problems.append(f"scenes[{si}] references missing node")

    return problems


def node_world_positions(gltf: dict, blob: bytes, node: dict) -> np.ndarray:
    """World-space vertex positions of one node's mesh (TRS applied)."""
    views = gltf["bufferViews"]
    accessors = gltf["accessors"]
    mesh = gltf["meshes"][node["mesh"]]
    acc = accessors[mesh["primitives"][0]["attributes"]["POSITION"]]
    view = views[acc["bufferView"]]
    start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    pos = np.frombuffer(blob, dtype="<f4", count=acc["count"] * 3, offset=start).reshape(-1, 3)
    pos = pos.astype(np.float64)

    scale = np.array(node.get("scale", [1.0, 1.0, 1.0]))
    q = node.get("rotation", [0.0, 0.0, 0.0, 1.0])
    t = np.array(node.get("translation", [0.0, 0.0, 0.0]))
    x, y, z, w = q
    rot = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    return (pos * scale) @ rot.T + t
