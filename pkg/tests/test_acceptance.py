"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from majutsu.cli import main as cli_main
from majutsu.editing import EditCommand, apply_command, parse_command, replay, undo
from majutsu.errors import RefineExhausted
from majutsu.geometry import (
    Box3,
    OrientedBox,
    box_mesh,
    compute_obb,
    extrude_footprint,
    fit_placement,
)
from majutsu.gltf import parse_glb, validate_gltf
from majutsu.layout import (
    BuildingInstance,
    FootprintPolygon,
    HeightMap,
    LayoutMap,
    SemanticClass,
    extract_building_instances,
    ring_area,
)
from majutsu.metrics import FeatureSet, compute_fid, compute_is, compute_kid
from majutsu.placement import SamplingConfig, distance_transform, poisson_disk_sample, sample_roadside_points
from majutsu.providers import ProviderConfig, build_asset_request, constrained_refine_loop
from majutsu.ranking import Rating, rank_methods, schedule_comparisons, trueskill_update_pair
from majutsu.scene import content_equal, load_document, save_document

from conftest import build_scene, make_layout
from oracles import brute_force_edt, brute_force_min_obb_area, flood_fill_components, reference_trueskill_update
from test_geometry import random_simple_footprint
from test_editing import random_command
from test_ranking import planted_records


def report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}" + (f" ({detail})" if detail else ""), flush=True)
    assert ok, f"{name}: {detail}"


class TestAcceptance:
    def test_layout_oracle_suite(self):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        checked = 0
        for trial in range(50):
            h = int(rng.integers(8, 65))
            w = int(rng.integers(8, 65))
            mask = rng.random((h, w)) < float(rng.uniform(0.2, 0.6))
            cells = np.where(mask, int(SemanticClass.BUILDING), int(SemanticClass.GROUND))
            layout = make_layout(cells.astype(np.uint8), 2.0)
            hmap = HeightMap(heights=np.where(mask, 25.0, 0.0))
            instances = extract_building_instances(layout, hmap, min_pixels=1)
            oracle = flood_fill_components(mask, connectivity=8)
            assert len(instances) == len(oracle), f"trial {trial}: component count"
            for inst, comp in zip(instances, oracle):
                assert inst.pixel_count == len(comp), f"trial {trial}: size mismatch"
                rows = [r for r, _ in comp]
                cols = [c for _, c in comp]
                assert inst.bbox == (min(rows), min(cols), max(rows) + 1, max(cols) + 1)
                # footprint area within the perimeter bound
                boundary = sum(
                    1
                    for r, c in comp
                    if any(
                        not (0 <= r + dr < h and 0 <= c + dc < w) or (r + dr, c + dc) not in comp
                        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                    )
                )
                area_err = abs(inst.footprint.area() - len(comp) * 4.0)
                assert area_err <= boundary * 4.0, f"trial {trial}: area bound"
                checked += 1
        elapsed = time.perf_counter() - t0
        report(
            "layout oracle suite (50 masks vs flood fill, area bounds)",
            elapsed < 5.0,
            f"{checked} instances, {elapsed:.2f}s < 5s",
        )

    def test_geometry_conservation(self):
        rng = np.random.default_rng(7)
        worst_vol = 0.0
        for _ in range(100):
            fp = random_simple_footprint(rng)
            height = 1.0 + 80.0 * rng.random()
            mesh = extrude_footprint(fp, height)
            rel = abs(mesh.signed_volume() - fp.area() * height) / (fp.area() * height)
            worst_vol = max(worst_vol, rel)
            assert rel <= 1e-6

            obb = compute_obb(fp.outer)
            oracle_area = brute_force_min_obb_area(fp.outer)
            assert obb.area() <= oracle_area + 1e-9

            instance = BuildingInstance(
                id="acc",
                pixel_count=10,
                footprint=fp,
                obb=obb if min(obb.extents) > 1e-9 else OrientedBox(obb.center, 0.0, (1.0, 1.0)),
                target_height=height,
            )
            bounds = Box3(min=np.array([-0.5, -0.5, 0.0]), max=np.array([0.5, 0.5, 1.0]))
            placement = fit_placement(bounds, instance)
            corners = np.array(
                [[x, y, 0.0] for x in (-0.5, 0.5) for y in (-0.5, 0.5)]
            )
            moved = placement.apply(corners)
            assert instance.obb.contains(moved[:, :2], slack=1e-6).all()
        report(
            "geometry conservation (volume 1e-6, OBB optimality, containment)",
            True,
            f"100 footprints, worst volume rel err {worst_vol:.2e}",
        )

    def test_placement_properties(self):
        # 20 seeded Poisson runs, exhaustive pairwise distances
        violations = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            mask = rng.random((40, 40)) < 0.7
            cfg = SamplingConfig(radius_r=6.0, seed=seed)
            pts = poisson_disk_sample(mask, cfg, meters_per_pixel=2.0)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    dx = pts[i].position[0] - pts[j].position[0]
                    dy = pts[i].position[1] - pts[j].position[1]
                    if math.hypot(dx, dy) < cfg.radius_r:
                        violations += 1
        assert violations == 0

        # exact distance transform vs O(n^2) brute force on 64x64
        rng = np.random.default_rng(99)
        mask = rng.random((64, 64)) < 0.04
        mask[10, 10] = True
        dt = distance_transform(mask, meters_per_pixel=2.0)
        assert np.allclose(dt, brute_force_edt(mask, 2.0), atol=1e-9)

        # roadside band + spacing on 3 analytic road shapes
        def check_shape(cells: np.ndarray, side_key, order_key):
            layout = make_layout(cells, 2.0)
            cfg = SamplingConfig(roadside_spacing_s=20.0, roadside_offset_d=4.0, seed=0)
            pts = sample_roadside_points(layout, cfg)
            assert pts
            dt_road = distance_transform(layout.mask(SemanticClass.ROAD), 2.0)
            sides: dict = {}
            for p in pts:
                col = int(p.position[0] / 2.0)
                row = int(p.position[1] / 2.0)
                assert abs(dt_road[row, col] - 4.0) <= 2.0  # offset band
                sides.setdefault(side_key(p.position), []).append(p.position)
            for positions in sides.values():
                positions.sort(key=order_key)
                if len(positions) < 2:
                    continue
                gaps = [
                    math.dist(positions[i], positions[i + 1])
                    for i in range(len(positions) - 1)
                ]
                assert all(18.0 <= g 	<= 22.0 for g in gaps), gaps

        size = 64
        horizontal = np.full((size, size), int(SemanticClass.GROUND), dtype=np.uint8)
        horizontal[30:33, :] = int(SemanticClass.ROAD)
        check_shape(horizontal, lambda p: p[1] < 62.0, lambda p: p[0])

        vertical = np.full((size, size), int(SemanticClass.GROUND), dtype=np.uint8)
        vertical[:, 30:33] = int(SemanticClass.ROAD)
        check_shape(vertical, lambda p: p[0] < 62.0, lambda p: p[1])

        diagonal = np.full((size, size), int(SemanticClass.GROUND), dtype=np.uint8)
        for k in range(size):
            diagonal[k, max(0, k - 1) : min(size, k + 2)] = int(SemanticClass.ROAD)
        check_shape(
            diagonal,
            lambda p: p[0] - p[1] > 0,
            lambda p: p[0] + p[1],
        )
        report("placement properties (Poisson, exact EDT, roadside bands)", True)

    def test_metric_oracles(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(5)

        rows = rng.normal(size=(96, 16))
        assert compute_fid(FeatureSet(rows=rows), FeatureSet(rows=rows)) <= 1e-8

        x = rng.normal(size=(300, 1))
        x = (x - x.mean(axis=0)) / x.std(axis=0, ddof=1)
        assert compute_fid(FeatureSet(rows=x), FeatureSet(rows=x + 1.0)) == pytest.approx(
            1.0, abs=1e-6
        )

        c = 7
        assert compute_is(np.full((20, c), 1.0 / c)) == pytest.approx(1.0, abs=1e-12)
        assert compute_is(np.tile(np.eye(c), (4, 1))) == pytest.approx(c, rel=1e-12)
        one_hot = np.zeros((9, c))
        one_hot[:, 2] = 1.0
        assert compute_is(one_hot) == pytest.approx(1.0, abs=1e-12)
        for _ in range(20):
            raw = rng.random((15, c)) + 1e-12
            probs = raw / raw.sum(axis=1, keepdims=True)
            assert 1.0 - 1e-9 <= compute_is(probs) <= c + 1e-9

        estimates = [
            compute_kid(
                FeatureSet(rows=rng.normal(size=(40, 8))),
                FeatureSet(rows=rng.normal(size=(40, 8))),
            )
            for _ in range(100)
        ]
        estimates = np.array(estimates)
        stderr = estimates.std(ddof=1) / np.sqrt(len(estimates))
        assert abs(estimates.mean()) < 3 * stderr
        elapsed = time.perf_counter() - t0
        report(
            "metric oracles (FID/IS closed forms, KID unbiasedness)",
            elapsed < 30.0,
            f"{elapsed:.2f}s < 30s",
        )

    def test_trueskill_acceptance(self):
        rng = np.random.default_rng(13)
        worst = 0.0
        for _ in range(1000):
            mu_w = float(rng.normal(25, 8))
            mu_l = float(rng.normal(25, 8))
            s_w = float(0.8 + 9.0 * rng.random())
            s_l = float(0.8 + 9.0 * rng.random())
            got_w, got_l = trueskill_update_pair(
                Rating(mu=mu_w, sigma=s_w), Rating(mu=mu_l, sigma=s_l)
            )
            ref = reference_trueskill_update(mu_w, s_w, mu_l, s_l)
            err = max(
                abs(got_w.mu - ref[0]),
                abs(got_w.sigma - ref[1]),
                abs(got_l.mu - ref[2]),
                abs(got_l.sigma - ref[3]),
            )
            worst = max(worst, err)
            assert err <= 1e-6

        recovered = 0
        runs = 100
        for run in range(runs):
            n = 3 + run % 4  # 3..6 methods
            methods = [f"m{run}_{i}" for i in range(n)]
            boards = rank_methods(planted_records(methods, 30))
            if [r.method for r in boards["SVC"]] == methods:
                recovered += 1
        assert recovered / runs >= 0.95

        sched_rng = np.random.default_rng(31)
        for trial in range(50):
            n_methods = int(sched_rng.integers(2, 6))
            images = {
                f"m{k}": [f"m{k}_img{i}" for i in range(int(sched_rng.integers(1, 9)))]
                for k in range(n_methods)
            }
            schedule = schedule_comparisons(images, "SVC", seed=trial)
            participation: dict[str, int] = {}
            for pair in schedule:
                participation[pair["image_a"]] = participation.get(pair["image_a"], 0) + 1
                participation[pair["image_b"]] = participation.get(pair["image_b"], 0) + 1
            total_images = sum(len(v) for v in images.values())
            assert len(participation) == total_images
            assert min(participation.values()) >= 10, f"config {trial}"
        report(
            "trueskill acceptance (1e-6 vs reference, >=95% order recovery, >=10 participation)",
            True,
            f"worst update err {worst:.2e}, recovery {recovered}/{runs}",
        )

    def test_edit_engine_algebra(self):
        rng = np.random.default_rng(777)
        base = build_scene(n_buildings=3, n_trees=3, n_lamps=1)
        total_commands = 0
        sequences = 0
        while total_commands < 1000:
            doc = base
            seq_len = int(rng.integers(20, 60))
            for _ in range(seq_len):
                cmd = random_command(rng, doc)
                try:
                    out = apply_command(doc, cmd)
                except Exception:
                    continue
                assert content_equal(undo(out), doc)  # exact inverse
                doc = out
                total_commands += 1
            assert save_document(replay(base, doc.edit_log)) == save_document(doc)
            sequences += 1

        # Move composition against the transform oracle
        for _ in range(200):
            doc = base
            d1 = rng.random(3) * 10 - 5
            d2 = rng.random(3) * 10 - 5
            r1, r2 = rng.random() * 2, rng.random() * 2
            s1, s2 = 0.5 + rng.random(), 0.5 + rng.random()
            m1 = EditCommand("move", {"instance_id": "bldg_0000", "delta": d1.tolist(), "rotate": r1, "scale": s1})
            m2 = EditCommand("move", {"instance_id": "bldg_0000", "delta": d2.tolist(), "rotate": r2, "scale": s2})
            combined = EditCommand(
                "move",
                {
                    "instance_id": "bldg_0000",
                    "delta": (d1 + d2).tolist(),
                    "rotate": r1 + r2,
                    "scale": s1 * s2,
                },
            )
            stepped = apply_command(apply_command(doc, m1), m2).instance("bldg_0000").placement
            direct = apply_command(doc, combined).instance("bldg_0000").placement
            assert np.allclose(stepped.translation, direct.translation, atol=1e-9)
            assert abs(stepped.yaw - direct.yaw) % (2 * math.pi) == pytest.approx(0.0, abs=1e-9)
            assert stepped.xy_scale == pytest.approx(direct.xy_scale, rel=1e-12)
            assert stepped.z_scale == pytest.approx(direct.z_scale, rel=1e-12)
        report(
            "edit-engine algebra (inverse, replay, move composition)",
            True,
            f"{total_commands} commands over {sequences} sequences",
        )

    def test_end_to_end_offline(self, tmp_path):
        runner = CliRunner()
        timings = []
        outs = []
        for run_dir in ("run_a", "run_b"):
            out = tmp_path / run_dir
            t0 = time.perf_counter()
            result = runner.invoke(
                cli_main,
                ["run", "--offline", "--seed", "7", "--out", str(out)],
            )
            timings.append(time.perf_counter() - t0)
            assert result.exit_code == 0, result.output
            outs.append(out)
        for name in (
            "design.json",
            "layout.png",
            "height.png",
            "scene.majutsu.json",
            "scene.glb",
            "report.json",
        ):
            assert (outs[0] / name).is_file(), name
        scene_a = (outs[0] / "scene.majutsu.json").read_bytes()
        scene_b = (outs[1] / "scene.majutsu.json").read_bytes()
        assert scene_a == scene_b  # byte-identical across reruns

        glb = (outs[0] / "scene.glb").read_bytes()
        assert validate_gltf(glb) == []
        doc = load_document(scene_a)
        gltf, _ = parse_glb(glb)
        assert len(gltf["nodes"]) == 4 + len(doc.instances) + 1  # node-count law
        assert max(timings) < 60.0
        assert doc.metadata["width_px"] == 512 and doc.metadata["height_px"] == 512
        report(
            "end-to-end offline (six artifacts, deterministic, glb valid, node law)",
            True,
            f"512x512, runs {timings[0]:.1f}s/{timings[1]:.1f}s < 60s, {len(doc.instances)} instances",
        )

    def test_refine_loop_behaviors(self):
        cfg = ProviderConfig(seed=3, map_size=64)
        from majutsu.providers import design_scene, generate_layout_pair

        layout, hmap = generate_layout_pair(design_scene("refine town", cfg), cfg)
        instance = extract_building_instances(layout, hmap)[0]
        req = build_asset_request(instance, "prompt", cfg)

        # accept at iteration 1 (offline provider reproduces the prior exactly)
        _, trace = constrained_refine_loop(req, cfg)
        assert [s.iteration for s in trace] == [1] and trace[0].accepted

        # exhaust at 3 with a hopeless stub
        bad = box_mesh(0.01, 0.01, 50.0)
        with pytest.raises(RefineExhausted) as err:
            constrained_refine_loop(req, cfg, provider=lambda r, i: bad)
        assert [s.iteration for s in err.value.trace] == [1, 2, 3]
        assert not any(s.accepted for s in err.value.trace)

        # theta = 0 accepts any candidate
        from dataclasses import replace as dc_replace

        cfg0 = dc_replace(cfg, iou_threshold=0.0)
        _, trace0 = constrained_refine_loop(req, cfg0, provider=lambda r, i: bad)
        assert len(trace0) == 1 and trace0[0].accepted
        report("refine loop (accept@1, exhaust@3, theta=0 accept-always)", True)
