"""Clients for external generative services with deterministic offline twins.

Each provider kind (scene designer, layout pair, 3D asset) speaks a small
HTTP/JSON contract with base64 payloads; offline mode replaces every call
with a pure function of (inputs, seed) so the whole pipeline runs with no
network. The shape-constrained refine loop and asset matching live here too.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace

import numpy as np

from . import citygen
from .errors import (
    IncompleteSpec,
    InvalidProviderOutput,
    ProviderUnavailable,
    RefineExhausted,
    EmptyLibrary,
)
from .geometry import (
    Mesh,
    PointCloud,
    SilhouetteMask,
    extrude_footprint,
    render_iso_silhouette,
    sample_mesh_surface,
    silhouette_iou,
)
from .layout import (
    BuildingInstance,
    FootprintPolygon,
    HeightMap,
    LayoutMap,
    decode_height_image,
    decode_layout_image,
    validate_consistency,
)
from .libraries import STYLES, AssetLibrary, hash_stable

logger = logging.getLogger(__name__)

POINT_CLOUD_SAMPLES = 2048


@dataclass(frozen=True)
class DesignSpec:
    """Structured urban design guidance: layout, assets, materials, skymap."""

    layout_text: str
    assets_design: str
    materials_design: str
    skymap_design: str
    style_tag: str

    def __post_init__(self):
        for section in ("layout_text", "assets_design", "materials_design", "skymap_design"):
            if not getattr(self, section):
                raise IncompleteSpec(section.replace("_text", "").replace("_design", ""))

    def to_dict(self) -> dict:
        return {
            "layout": self.layout_text,
            "assets": self.assets_design,
            "materials": self.materials_design,
            "skymap": self.skymap_design,
            "style_tag": self.style_tag,
        }


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "offline"  # offline | external
    design_url: str = ""
    layout_url: str = ""
    asset_url: str = ""
    judge_url: str = ""
    timeout_s: float = 30.0
    retries: int = 2
    cfg_scale: float = 9.0  # pass-through to external layout diffusion
    steps: int = 50  # pass-through DDIM steps
    seed: int = 0
    iou_threshold: float = 0.85
    max_refine_iters: int = 3
    map_size: int = 512
    silhouette_resolution: int = 128

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class AssetRequest:
    """Everything an asset generator needs for one building instance."""

    instance: BuildingInstance
    coarse_mesh: Mesh  # canonical local frame: OBB center at origin, yaw removed
    iso_silhouette: SilhouetteMask
    point_cloud: PointCloud
    prompt: str
    reference_image: bytes | None = None


@dataclass(frozen=True)
class RefineStep:
    iteration: int
    score: float
    accepted: bool


def http_post_json(
    url: str, payload: dict, timeout_s: float, retries: int, _sleep=time.sleep
) -> dict:
    """POST JSON with bounded exponential backoff; ProviderUnavailable after retries."""
    body = json.dumps(payload).encode("utf-8")
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            request = urllib.request.Request(
                url, data=body, headers={"Content-Type": "application/json"}
            )
            with urllib.request.urlopen(request, timeout=timeout_s) as response:
                return json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError, ValueError) as exc:
            last_error = exc
            if attempt < retries:
                _sleep(min(2.0, 0.1 * 2**attempt))
    raise ProviderUnavailable(f"POST {url} failed after {retries + 1} attempts: {last_error}")


# -- scene design -----------------------------------------------------------------


def match_style(prompt: str, styles: tuple[str, ...] = STYLES) -> str:
    """Nearest library style by token match; hash-picked when nothing matches."""
    low = prompt.lower()
    scored = [(style, low.count(style)) for style in styles]
    best = max(scored, key=lambda kv: kv[1])
    if best[1] > 0:
        return best[0]
    return styles[hash_stable(low) % len(styles)]


def design_scene(prompt: str, cfg: ProviderConfig, post=http_post_json) -> DesignSpec:
    """Turn a free-form prompt into the four-section design template."""
    if not prompt.strip():
        raise ValueError("prompt must be nonempty")
    if cfg.mode == "external":
        raw = post(
            cfg.design_url,
            {"prompt": prompt, "seed": cfg.seed},
            cfg.timeout_s,
            cfg.retries,
        )
        for section in ("layout", "assets", "materials", "skymap"):
            if not raw.get(section):
                raise IncompleteSpec(section)
        return DesignSpec(
            layout_text=raw["layout"],
            assets_design=raw["assets"],
            materials_design=raw["materials"],
            skymap_design=raw["skymap"],
            style_tag=raw.get("style_tag") or match_style(prompt),
        )

    style = match_style(prompt)
    key = hash_stable(f"{prompt}|{cfg.seed}")
    density = ("sparse", "balanced", "dense")[key % 3]
    sky = ("clear midday light", "warm dusk glow", "overcast ambience")[(key // 3) % 3]
    water = "a river winding through" if (key // 9) % 2 else "scattered ponds near parks"
    return DesignSpec(
        layout_text=(
            f"{prompt}. A {density} street grid with jittered main roads, "
            f"city blocks subdivided into building lots, {water}, and park "
            f"pockets along the arterials."
        ),
        assets_design=(
            f"{style} buildings in twenty types from slab housing to landmark "
            f"towers; rooflines and massing follow each footprint's oriented box."
        ),
        materials_design=(
            f"seamlessly tiling PBR surfaces: asphalt roads, concrete ground, "
            f"{style}-keyed facades, calm water, and short grass."
        ),
        skymap_design=f"panoramic sky with {sky}, matched to the {style} palette.",
        style_tag=style,
    )


# -- layout pair ------------------------------------------------------------------


def generate_layout_pair(
    spec: DesignSpec, cfg: ProviderConfig, post=http_post_json
) -> tuple[LayoutMap, HeightMap]:
    """Layout + height maps from the external diffusion service or the
    seeded offline generator; both paths end in consistency validation with
    the standard repair policy."""
    if cfg.mode == "external":
        raw = post(
            cfg.layout_url,
            {
                "layout_text": spec.layout_text,
                "cfg_scale": cfg.cfg_scale,
                "steps": cfg.steps,
                "seed": cfg.seed,
            },
            cfg.timeout_s,
            cfg.retries,
        )
        try:
            layout = decode_layout_image(base64.b64decode(raw["layout_png"]))
            hmap = decode_height_image(base64.b64decode(raw["height_png"]))
        except KeyError as exc:
            raise InvalidProviderOutput(f"missing field {exc}") from exc
        if layout.width != cfg.map_size or layout.height != cfg.map_size:
            raise InvalidProviderOutput("size")
        if (layout.width, layout.height) != (hmap.width, hmap.height):
            raise InvalidProviderOutput("size")
    else:
        want_river = "river" in spec.layout_text.lower()
        layout, hmap = citygen.generate_city(
            seed=cfg.seed, size=cfg.map_size, want_river=want_river
        )
    report = validate_consistency(layout, hmap)
    return layout, report.repaired_heights


# -- asset generation --------------------------------------------------------------


def to_local_frame(instance: BuildingInstance) -> FootprintPolygon:
    """Footprint moved to the canonical asset frame: OBB center at the
    origin, OBB yaw rotated away."""
    obb = instance.obb
    c, s = math.cos(-obb.yaw), math.sin(-obb.yaw)
    rot = np.array([[c, -s], [s, c]])

    def transform(ring: np.ndarray) -> np.ndarray:
        return (ring - obb.center) @ rot.T

    return FootprintPolygon(
        outer=transform(instance.footprint.outer),
        holes=tuple(transform(h) for h in instance.footprint.holes),
    )


def coarse_geometry(instance: BuildingInstance) -> Mesh:
    """Footprint extrusion in the canonical local frame."""
    return extrude_footprint(to_local_frame(instance), instance.target_height)


def build_asset_request(
    instance: BuildingInstance, prompt: str, cfg: ProviderConfig
) -> AssetRequest:
    mesh = coarse_geometry(instance)
    silhouette = render_iso_silhouette(mesh, cfg.silhouette_resolution)
    cloud_seed = hash_stable(f"{instance.id}|{cfg.seed}") % 2**63
    cloud = sample_mesh_surface(mesh, POINT_CLOUD_SAMPLES, seed=cloud_seed)
    return AssetRequest(
        instance=instance,
        coarse_mesh=mesh,
        iso_silhouette=silhouette,
        point_cloud=cloud,
        prompt=prompt,
    )


def _facade_uvs(mesh: Mesh) -> Mesh:
    uvs = np.column_stack(
        [(mesh.vertices[:, 0] + mesh.vertices[:, 1]) * 0.2, mesh.vertices[:, 2] * 0.2]
    )
    return Mesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles,
        normals=mesh.normals,
        uvs=uvs,
    )


def request_asset(req: AssetRequest, cfg: ProviderConfig, post=http_post_json) -> Mesh:
    """One asset-generation call; offline returns the coarse geometry with
    procedural facade UVs (silhouette IoU 1 by construction)."""
    if cfg.mode == "external":
        payload = {
            "prompt": req.prompt,
            "silhouette": base64.b64encode(
                np.packbits(req.iso_silhouette.bits).tobytes()
            ).decode("ascii"),
            "silhouette_resolution": req.iso_silhouette.resolution,
            "point_cloud": base64.b64encode(
                req.point_cloud.points.astype("<f4").tobytes()
            ).decode("ascii"),
            "seed": cfg.seed,
        }
        if req.reference_image is not None:
            payload["reference_image"] = base64.b64encode(req.reference_image).decode("ascii")
        raw = post(cfg.asset_url, payload, cfg.timeout_s, cfg.retries)
        mesh = _parse_mesh_payload(raw)
        if mesh.is_empty():
            raise InvalidProviderOutput("empty")
        return mesh
    return _facade_uvs(req.coarse_mesh)


def _parse_mesh_payload(raw: dict) -> Mesh:
    from .geometry import _vertex_normals

    try:
        verts = np.frombuffer(
            base64.b64decode(raw["vertices"]), dtype="<f4"
        ).reshape(-1, 3).astype(np.float64)
        tris = np.frombuffer(base64.b64decode(raw["triangles"]), dtype="<u4").reshape(-1, 3)
    except (KeyError, ValueError) as exc:
        raise InvalidProviderOutput(f"bad mesh payload: {exc}") from exc
    tris = tris.astype(np.int32)
    return Mesh(vertices=verts, triangles=tris, normals=_vertex_normals(verts, tris))


def _mask_payload(mask: SilhouetteMask) -> dict:
    return {
        "bits": base64.b64encode(np.packbits(mask.bits).tobytes()).decode("ascii"),
        "resolution": mask.resolution,
    }


def judge_scorer(cfg: ProviderConfig, post=http_post_json):
    """Remote shape-agreement judge: scores a candidate silhouette against
    the coarse-geometry prior in [0, 1]."""

    def score(candidate: SilhouetteMask, prior: SilhouetteMask) -> float:
        raw = post(
            cfg.judge_url,
            {"candidate": _mask_payload(candidate), "prior": _mask_payload(prior)},
            cfg.timeout_s,
            cfg.retries,
        )
        try:
            value = float(raw["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProviderOutput(f"bad judge response: {exc}") from exc
        if not 0.0 <= value <= 1.0:
            raise InvalidProviderOutput(f"judge score {value} outside [0, 1]")
        return value

    return score


def constrained_refine_loop(
    req: AssetRequest,
    cfg: ProviderConfig,
    provider=None,
    scorer=None,
) -> tuple[Mesh, list[RefineStep]]:
    """Review-regenerate loop: accept the first candidate whose shape
    agreement with the prior reaches the threshold, up to max_refine_iters.

    The scorer defaults to silhouette IoU; a remote judge endpoint takes over
    in external mode when judge_url is configured.
    """
    if provider is None:
        provider = lambda request, iteration: request_asset(request, cfg)  # noqa: E731
    if scorer is None:
        if cfg.mode == "external" and cfg.judge_url:
            scorer = judge_scorer(cfg)
        else:
            scorer = silhouette_iou
    trace: list[RefineStep] = []
    best = 0.0
    for iteration in range(1, cfg.max_refine_iters + 1):
        candidate = provider(req, iteration)
        rendered = render_iso_silhouette(candidate, req.iso_silhouette.resolution)
        score = scorer(rendered, req.iso_silhouette)
        accepted = score >= cfg.iou_threshold
        trace.append(RefineStep(iteration=iteration, score=score, accepted=accepted))
        best = max(best, score)
        if accepted:
            return candidate, trace
    error = RefineExhausted(best)
    error.trace = trace
    raise error


# -- asset matching -----------------------------------------------------------------


def match_assets(
    instances: list[BuildingInstance],
    spec: DesignSpec,
    library: AssetLibrary,
    seed: int = 0,
) -> dict[str, str]:
    """Deterministic instance -> library-asset assignment.

    Filter by the design's style tag (full library fallback with a warning),
    then minimize |asset aspect - OBB aspect| with a seeded hash tie-break.
    """
    candidates = [e for e in library.by_style(spec.style_tag) if e.category == "building"]
    if not candidates:
        candidates = library.by_category("building")
        if candidates:
            logger.warning(
                "no assets tagged style %r; falling back to the full library",
                spec.style_tag,
            )
    if not candidates:
        raise EmptyLibrary("library holds no building assets")

    mapping: dict[str, str] = {}
    for inst in instances:
        w, l = inst.obb.width, inst.obb.length
        lo, hi = sorted((w, l))
        obb_aspect = hi / lo if lo > 1e-9 else math.inf
        mapping[inst.id] = min(
            candidates,
            key=lambda e: (
                abs(e.aspect() - obb_aspect),
                hash_stable(f"{seed}|{inst.id}|{e.id}"),
            ),
        ).id
    return mapping
