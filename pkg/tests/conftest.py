from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from majutsu.layout import HeightMap, LayoutMap, SemanticClass


def make_layout(cells: np.ndarray, mpp: float = 2.0) -> LayoutMap:
    return LayoutMap(cells=np.asarray(cells, dtype=np.uint8), meters_per_pixel=mpp)


def uniform_layout(h: int, w: int, cls: SemanticClass = SemanticClass.GROUND, mpp: float = 2.0) -> LayoutMap:
    return make_layout(np.full((h, w), int(cls)), mpp)


def heights_like(layout: LayoutMap, value: float = 0.0, h_max: float = 150.0) -> HeightMap:
    return HeightMap(
        heights=np.full((layout.height, layout.width), value, dtype=np.float64), h_max=h_max
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def demo_materials() -> dict:
    from majutsu.scene import MaterialDef

    def mat(mid: str) -> MaterialDef:
        return MaterialDef(
            id=mid,
            base_color=f"textures/{mid}_basecolor.png",
            normal=f"textures/{mid}_normal.png",
            roughness=f"textures/{mid}_roughness.png",
            metallic=f"textures/{mid}_metallic.png",
            ambient_occlusion=f"textures/{mid}_ao.png",
            uv_tiling=0.25,
        )

    return {
        "ground": mat("concrete_01"),
        "road": mat("asphalt_01"),
        "water": mat("water_01"),
        "vegetation": mat("grass_01"),
    }


def build_scene(n_buildings: int = 2, n_trees: int = 3, n_lamps: int = 1, seed: int = 0):
    """Small assembled document for scene/edit/export tests."""
    from majutsu.layout import HeightMap, SemanticClass, extract_building_instances
    from majutsu.geometry import box_mesh
    from majutsu.placement import (
        KIND_STREETLIGHT,
        KIND_TREE,
        PlacementPoint,
        SOURCE_ROADSIDE,
        SOURCE_VEGETATION,
    )
    from majutsu.scene import SkyboxDef, assemble_scene

    cells = np.full((64, 64), int(SemanticClass.GROUND), dtype=np.uint8)
    cells[60:64, :] = int(SemanticClass.ROAD)
    cells[0:4, 0:4] = int(SemanticClass.WATER)
    cells[0:4, 8:12] = int(SemanticClass.VEGETATION)
    for k in range(n_buildings):
        r = 10 + 8 * (k // 7)
        c = 4 + 8 * (k % 7)
        cells[r : r + 6, c : c + 6] = int(SemanticClass.BUILDING)
    layout = make_layout(cells, 2.0)
    heights = np.where(cells == int(SemanticClass.BUILDING), 30.0, 0.0)
    hmap = HeightMap(heights=heights)
    instances = extract_building_instances(layout, hmap)
    assert len(instances) == n_buildings

    assets = {inst.id: "asset_box" for inst in instances}
    asset_meshes = {
        "asset_box": box_mesh(1.0, 1.0, 1.0),
        "tree_default": box_mesh(2.0, 2.0, 6.0),
        "streetlight_default": box_mesh(0.4, 0.4, 8.0),
    }
    placements = []
    for i in range(n_trees):
        placements.append(
            PlacementPoint(position=(20.0 + 10 * i, 10.0), kind=KIND_TREE, source=SOURCE_VEGETATION)
        )
    for i in range(n_lamps):
        placements.append(
            PlacementPoint(
                position=(30.0 + 8 * i, 115.0), kind=KIND_STREETLIGHT, source=SOURCE_ROADSIDE
            )
        )
    materials = demo_materials()
    extra = [
        type(materials["road"])(
            id="asphalt_02",
            base_color="textures/asphalt_02_basecolor.png",
            normal="textures/asphalt_02_normal.png",
            roughness="textures/asphalt_02_roughness.png",
            metallic="textures/asphalt_02_metallic.png",
            ambient_occlusion="textures/asphalt_02_ao.png",
            uv_tiling=0.3,
        )
    ]
    return assemble_scene(
        layout,
        hmap,
        instances,
        assets,
        placements,
        materials,
        SkyboxDef(id="sky_dusk", hdr_ref="skyboxes/dusk.png", rotation=0.25),
        asset_meshes=asset_meshes,
        extra_materials=extra,
        seed=seed,
        name="test-scene",
    )
