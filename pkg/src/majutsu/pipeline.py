"""End-to-end pipeline driver: prompt or layout pair in, scene artifacts out.

Writes design.json, layout.png, height.png, scene.majutsu.json, scene.glb,
and report.json into the output directory. Offline mode needs no network and
is byte-deterministic for the scene document across reruns.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MajutsuError
from .layout import (
    HeightMap,
    LayoutMap,
    decode_height_image,
    decode_layout_image,
    encode_height_image,
    encode_layout_image,
    extract_building_instances,
    palette_json,
    validate_consistency,
)
from .libraries import (
    LAYER_MATERIAL_TAGS,
    MaterialLibrary,
    SkyboxLibrary,
    generate_default_library,
    hash_stable,
    ingest_libraries,
)
from .gltf import export_gltf
from .placement import SamplingConfig, poisson_disk_sample, sample_roadside_points
from .providers import (
    DesignSpec,
    ProviderConfig,
    build_asset_request,
    constrained_refine_loop,
    design_scene,
    generate_layout_pair,
    match_assets,
)
from .layout import SemanticClass
from .scene import SceneDocument, assemble_scene, save_document

logger = logging.getLogger(__name__)

ARTIFACTS = (
    "design.json",
    "layout.png",
    "height.png",
    "scene.majutsu.json",
    "scene.glb",
    "report.json",
)


class PipelineError(MajutsuError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    out_dir: Path
    prompt: str | None = None
    layout_path: Path | None = None
    height_path: Path | None = None
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    library_dir: Path | None = None
    seed: int = 0
    name: str = "scene"
    export_glb: bool = True
    use_library_assets: bool = False
    sampling: SamplingConfig | None = None
    fan_out: int = 8

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        has_prompt = self.prompt is not None
        has_maps = self.layout_path is not None and self.height_path is not None
        if has_prompt == has_maps:
            raise ValueError("supply exactly one of --prompt or --layout/--height")
        if (self.layout_path is None) != (self.height_path is None):
            raise ValueError("layout and height paths come together")


@dataclass
class PipelineReport:
    artifacts: dict[str, str] = field(default_factory=dict)
    timings_s: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    refine_traces: dict[str, list[dict]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "artifacts": self.artifacts,
            "timings_s": {k: round(v, 4) for k, v in self.timings_s.items()},
            "counts": self.counts,
            "refine_traces": self.refine_traces,
            "warnings": self.warnings,
        }


class _Stage:
    def __init__(self, report: PipelineReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        logger.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.report.timings_s[self.name] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def _pick_skybox(spec: DesignSpec, skyboxes: SkyboxLibrary, seed: int):
    text = spec.skymap_design.lower()
    for key, sky_id in (("dusk", "sky_dusk"), ("night", "sky_night"), ("day", "sky_day")):
        if key in text and skyboxes.get(sky_id):
            return skyboxes.get(sky_id).skybox
    entries = sorted(skyboxes.entries, key=lambda e: e.skybox.id)
    if not entries:
        raise ValueError("skybox library is empty")
    return entries[hash_stable(f"sky|{seed}") % len(entries)].skybox


def _layer_materials(materials: MaterialLibrary) -> dict:
    chosen = {}
    for kind, tag in LAYER_MATERIAL_TAGS.items():
        entries = materials.by_tag(tag)
        if not entries:
            raise ValueError(f"material library has no {tag!r} entries for layer {kind}")
        chosen[kind] = sorted(entries, key=lambda e: e.material.id)[0].material
    return chosen


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    report = PipelineReport()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    provider_cfg = cfg.provider
    if provider_cfg.seed != cfg.seed:
        from dataclasses import replace

        provider_cfg = replace(provider_cfg, seed=cfg.seed)

    with _Stage(report, "design"):
        if cfg.prompt is not None:
            spec = design_scene(cfg.prompt, provider_cfg)
        else:
            spec = design_scene("ingested layout pair", provider_cfg)
        (out / "design.json").write_text(
            json.dumps(spec.to_dict(), indent=2, sort_keys=True)
        )
        report.artifacts["design"] = str(out / "design.json")

    with _Stage(report, "layout"):
        if cfg.layout_path is not None:
            layout = decode_layout_image(Path(cfg.layout_path).read_bytes())
            hmap = decode_height_image(Path(cfg.height_path).read_bytes())
            check = validate_consistency(layout, hmap)
            if not check.valid:
                report.warnings.append(
                    f"repaired {len(check.low_building_pixels)} low and "
                    f"{len(check.nonzero_nonbuilding_pixels)} stray height pixels"
                )
            hmap = check.repaired_heights
        else:
            layout, hmap = generate_layout_pair(spec, provider_cfg)
        (out / "layout.png").write_bytes(encode_layout_image(layout))
        (out / "height.png").write_bytes(encode_height_image(hmap, bits=16))
        (out / "palette.json").write_text(json.dumps(palette_json(), indent=2, sort_keys=True))
        report.artifacts["layout"] = str(out / "layout.png")
        report.artifacts["height"] = str(out / "height.png")

    with _Stage(report, "libraries"):
        lib_dir = cfg.library_dir or generate_default_library(out / "library")
        assets_lib, materials_lib, skyboxes_lib = ingest_libraries(lib_dir)

    with _Stage(report, "instances"):
        instances = extract_building_instances(layout, hmap)
        report.counts["building_instances"] = len(instances)

    with _Stage(report, "assets"):
        asset_meshes = {}
        assets_map = {}
        if cfg.use_library_assets:
            assets_map = match_assets(instances, spec, assets_lib, seed=cfg.seed)
            for ref in set(assets_map.values()):
                asset_meshes[ref] = assets_lib.load_mesh(ref)
        else:
            def refine(instance):
                request = build_asset_request(instance, spec.assets_design, provider_cfg)
                mesh, trace = constrained_refine_loop(request, provider_cfg)
                return instance.id, mesh, trace

            with ThreadPoolExecutor(max_workers=max(1, cfg.fan_out)) as pool:
                for inst_id, mesh, trace in pool.map(refine, instances):
                    ref = f"gen://{inst_id}"
                    assets_map[inst_id] = ref
                    asset_meshes[ref] = mesh
                    report.refine_traces[inst_id] = [
                        {"iteration": s.iteration, "score": round(s.score, 6), "accepted": s.accepted}
                        for s in trace
                    ]
        for prop in ("tree_default", "streetlight_default"):
            if assets_lib.get(prop):
                asset_meshes[prop] = assets_lib.load_mesh(prop)

    with _Stage(report, "placement"):
        sampling = cfg.sampling or SamplingConfig(seed=cfg.seed)
        trees = poisson_disk_sample(
            layout.mask(SemanticClass.VEGETATION), sampling, layout.meters_per_pixel
        )
        roadside = sample_roadside_points(layout, sampling)
        placements = trees + roadside
        report.counts["vegetation_trees"] = len(trees)
        report.counts["roadside_points"] = len(roadside)

    with _Stage(report, "assemble"):
        layer_materials = _layer_materials(materials_lib)
        extra = [
            e.material
            for e in materials_lib.entries
            if e.material.id not in {m.id for m in layer_materials.values()}
        ]
        skybox = _pick_skybox(spec, skyboxes_lib, cfg.seed)
        doc = assemble_scene(
            layout,
            hmap,
            instances,
            assets_map,
            placements,
            layer_materials,
            skybox,
            asset_meshes=asset_meshes,
            extra_materials=extra,
            seed=cfg.seed,
            name=cfg.name,
        )
        doc_path = out / "scene.majutsu.json"
        doc_path.write_bytes(save_document(doc))
        report.artifacts["scene"] = str(doc_path)
        report.counts["instances"] = len(doc.instances)

    if cfg.export_glb:
        with _Stage(report, "export"):
            glb_path = out / "scene.glb"
            glb_path.write_bytes(export_gltf(doc))
            report.artifacts["glb"] = str(glb_path)

    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    report.artifacts["report"] = str(out / "report.json")
    return report


def load_config_file(path: Path) -> dict:
    """Pipeline options from JSON, or a flat key = value TOML subset."""
    text = Path(path).read_text()
    if Path(path).suffix == ".json":
        return json.loads(text)
    options: dict = {}
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ValueError(f"cannot parse config line: {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if value.startswith('"') and value.endswith('"'):
            options[key] = value[1:-1]
        elif value in ("true", "false"):
            options[key] = value == "true"
        else:
            try:
                options[key] = int(value)
            except ValueError:
                options[key] = float(value)
    return options
