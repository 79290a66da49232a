from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from majutsu.cli import main as cli_main
from majutsu.gltf import parse_glb, validate_gltf
from majutsu.pipeline import ARTIFACTS, PipelineConfig, load_config_file, run_pipeline
from majutsu.providers import ProviderConfig
from majutsu.scene import load_document


def small_cfg(out_dir: Path, seed: int = 7, **kwargs) -> PipelineConfig:
    return PipelineConfig(
        out_dir=out_dir,
        prompt=kwargs.pop("prompt", "small riverside town"),
        provider=ProviderConfig(map_size=96),
        seed=seed,
        **kwargs,
    )


class TestPipeline:
    def test_all_artifacts_exist(self, tmp_path):
        report = run_pipeline(small_cfg(tmp_path / "out"))
        for name in ARTIFACTS:
            assert (tmp_path / "out" / name).is_file(), name
        assert (tmp_path / "out" / "palette.json").is_file()
        assert report.counts["instances"] > 0

    def test_deterministic_scene_bytes(self, tmp_path):
        run_pipeline(small_cfg(tmp_path / "a"))
        run_pipeline(small_cfg(tmp_path / "b"))
        a = (tmp_path / "a" / "scene.majutsu.json").read_bytes()
        b = (tmp_path / "b" / "scene.majutsu.json").read_bytes()
        assert a == b

    def test_seed_changes_scene(self, tmp_path):
        run_pipeline(small_cfg(tmp_path / "a", seed=1))
        run_pipeline(small_cfg(tmp_path / "b", seed=2))
        a = (tmp_path / "a" / "scene.majutsu.json").read_bytes()
        b = (tmp_path / "b" / "scene.majutsu.json").read_bytes()
        assert a != b

    def test_glb_validates_and_node_count(self, tmp_path):
        run_pipeline(small_cfg(tmp_path / "out"))
        glb = (tmp_path / "out" / "scene.glb").read_bytes()
        assert validate_gltf(glb) == []
        doc = load_document((tmp_path / "out" / "scene.majutsu.json").read_bytes())
        gltf, _ = parse_glb(glb)
        assert len(gltf["nodes"]) == 4 + len(doc.instances) + 1

    def test_config_xor_prompt_and_maps(self, tmp_path):
        with pytest.raises(ValueError):
            PipelineConfig(
                out_dir=tmp_path,
                prompt="x",
                layout_path=tmp_path / "l.png",
                height_path=tmp_path / "h.png",
            )
        with pytest.raises(ValueError):
            PipelineConfig(out_dir=tmp_path)

    def test_ingest_mode_round_trip(self, tmp_path):
        first = run_pipeline(small_cfg(tmp_path / "gen"))
        cfg = PipelineConfig(
            out_dir=tmp_path / "ingested",
            layout_path=tmp_path / "gen" / "layout.png",
            height_path=tmp_path / "gen" / "height.png",
            provider=ProviderConfig(map_size=96),
            seed=7,
        )
        second = run_pipeline(cfg)
        assert second.counts["building_instances"] == first.counts["building_instances"]
        a = load_document((tmp_path / "gen" / "scene.majutsu.json").read_bytes())
        b = load_document((tmp_path / "ingested" / "scene.majutsu.json").read_bytes())
        assert a.metadata["layout_sha256"] == b.metadata["layout_sha256"]
        assert a.metadata["height_sha256"] == b.metadata["height_sha256"]

    def test_refine_traces_recorded(self, tmp_path):
        report = run_pipeline(small_cfg(tmp_path / "out"))
        assert report.refine_traces
        for trace in report.refine_traces.values():
            assert trace[-1]["accepted"]
            assert trace[-1]["score"] == 1.0

    def test_library_assets_mode(self, tmp_path):
        report = run_pipeline(small_cfg(tmp_path / "out", use_library_assets=True))
        doc = load_document((tmp_path / "out" / "scene.majutsu.json").read_bytes())
        buildings = [i for i in doc.instances if i.category == "building"]
        assert buildings
        assert all(not i.asset_ref.startswith("gen://") for i in buildings)
        assert report.refine_traces == {}

    def test_stage_error_labelled(self, tmp_path):
        from majutsu.pipeline import PipelineError

        cfg = small_cfg(tmp_path / "out")
        cfg.library_dir = tmp_path / "missing_library"
        with pytest.raises(PipelineError) as err:
            run_pipeline(cfg)
        assert err.value.stage == "libraries"


class TestConfigFile:
    def test_json_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 5, "prompt": "harbor"}))
        options = load_config_file(path)
        assert options == {"seed": 5, "prompt": "harbor"}

    def test_flat_toml_subset(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(
            '# pipeline\nprompt = "dense downtown"\nseed = 12\nuse_library_assets = true\nmap_size = 96\n'
        )
        options = load_config_file(path)
        assert options["prompt"] == "dense downtown"
        assert options["seed"] == 12
        assert options["use_library_assets"] is True


class TestCli:
    def test_run_command(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            [
                "run",
                "--offline",
                "--seed",
                "7",
                "--prompt",
                "tiny test hamlet",
                "--out",
                str(tmp_path / "out"),
                "--config",
                str(self._cfg(tmp_path)),
            ],
        )
        assert result.exit_code == 0, result.output
        for name in ARTIFACTS:
            assert (tmp_path / "out" / name).is_file()

    def _cfg(self, tmp_path) -> Path:
        path = tmp_path / "small.toml"
        path.write_text("map_size = 96\n")
        return path

    def test_design_and_layout_commands(self, tmp_path):
        runner = CliRunner()
        design_path = tmp_path / "design.json"
        result = runner.invoke(
            cli_main,
            ["design", "--prompt", "misty canal town", "--offline", "--out", str(design_path)],
        )
        assert result.exit_code == 0, result.output
        spec = json.loads(design_path.read_text())
        assert set(spec) == {"layout", "assets", "materials", "skymap", "style_tag"}

    def test_edit_command(self, tmp_path):
        run_pipeline(small_cfg(tmp_path / "out"))
        scene_path = tmp_path / "out" / "scene.majutsu.json"
        before = load_document(scene_path.read_bytes())
        target = before.instances[0].id
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["edit", "--scene", str(scene_path), "--command", f"move {target} by (4,0)"],
        )
        assert result.exit_code == 0, result.output
        after = load_document(scene_path.read_bytes())
        assert after.revision == before.revision + 1
        result = runner.invoke(cli_main, ["edit", "--scene", str(scene_path), "--undo"])
        assert result.exit_code == 0, result.output

    def test_eval_commands(self, tmp_path):
        import numpy as np

        from majutsu.metrics import FeatureSet, save_features

        rng = np.random.default_rng(0)
        a = tmp_path / "a.mcfv"
        b = tmp_path / "b.mcfv"
        rows = rng.normal(size=(30, 4))
        a.write_bytes(save_features(FeatureSet(rows=rows)))
        b.write_bytes(save_features(FeatureSet(rows=rows)))
        runner = CliRunner()
        result = runner.invoke(cli_main, ["eval", "fid", str(a), str(b)])
        assert result.exit_code == 0, result.output
        assert float(result.output.strip()) == pytest.approx(0.0, abs=1e-6)

        manifest = tmp_path / "images.json"
        manifest.write_text(json.dumps({"methods": {"m1": ["a1", "a2"], "m2": ["b1"]}}))
        schedule_out = tmp_path / "schedule.json"
        result = runner.invoke(
            cli_main,
            ["eval", "schedule", "--images", str(manifest), "--out", str(schedule_out)],
        )
        assert result.exit_code == 0, result.output
        pairs = json.loads(schedule_out.read_text())
        assert len(pairs) >= 10
