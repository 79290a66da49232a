"""Command-line interface: majutsu run|design|layout|assemble|edit|eval|serve."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from .pipeline import ARTIFACTS, PipelineConfig, load_config_file, run_pipeline
from .providers import ProviderConfig


def _provider_from_options(offline: bool, seed: int, options: dict | None = None) -> ProviderConfig:
    options = options or {}
    base_url = options.get("provider_url") or os.environ.get("MAJUTSU_PROVIDER_URL", "")
    mode = "offline" if offline or not base_url else "external"
    kwargs = {}
    if base_url:
        kwargs = {
            "design_url": f"{base_url.rstrip('/')}/design",
            "layout_url": f"{base_url.rstrip('/')}/layout",
            "asset_url": f"{base_url.rstrip('/')}/asset",
            "judge_url": f"{base_url.rstrip('/')}/judge",
        }
    for key in ("cfg_scale", "steps", "iou_threshold", "max_refine_iters", "map_size", "retries"):
        if key in options:
            kwargs[key] = options[key]
    return ProviderConfig(mode=mode, seed=seed, **kwargs)


def _common_pipeline_config(
    prompt, layout, height, offline, seed, libs, out, config, library_assets
) -> PipelineConfig:
    options = load_config_file(Path(config)) if config else {}
    prompt = prompt if prompt is not None else options.get("prompt")
    if layout is None and "layout" in options:
        layout = options["layout"]
    if height is None and "height" in options:
        height = options["height"]
    seed = seed if seed is not None else int(options.get("seed", 0))
    if prompt is not None and (layout or height):
        raise click.UsageError("supply either --prompt or --layout/--height, not both")
    if prompt is None and not (layout and height):
        prompt = "small riverside town"
    return PipelineConfig(
        out_dir=Path(out),
        prompt=prompt,
        layout_path=Path(layout) if layout else None,
        height_path=Path(height) if height else None,
        provider=_provider_from_options(offline, seed, options),
        library_dir=Path(libs) if libs else None,
        seed=seed,
        use_library_assets=library_assets or bool(options.get("use_library_assets")),
        name=options.get("name", "scene"),
    )


@click.group()
def main():
    """City-scene compiler: layout maps to editable, exportable 3D scenes."""


_shared = [
    click.option("--prompt", default=None, help="text prompt for scene design"),
    click.option("--layout", default=None, type=click.Path(exists=True), help="layout PNG path"),
    click.option("--height", default=None, type=click.Path(exists=True), help="height PNG path"),
    click.option("--offline", is_flag=True, default=False, help="force offline providers"),
    click.option("--seed", default=None, type=int, help="pipeline seed"),
    click.option("--libs", default=None, type=click.Path(), help="library root directory"),
    click.option("--out", default="majutsu_out", type=click.Path(), help="output directory"),
    click.option("--config", default=None, type=click.Path(exists=True), help="TOML/JSON config"),
    click.option("--library-assets", is_flag=True, default=False, help="match library assets instead of generating"),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@main.command()
@shared_options
def run(prompt, layout, height, offline, seed, libs, out, config, library_assets):
    """Run the full pipeline: design, layout, assets, assemble, export."""
    cfg = _common_pipeline_config(
        prompt, layout, height, offline, seed, libs, out, config, library_assets
    )
    report = run_pipeline(cfg)
    click.echo(json.dumps(report.to_dict()["counts"], indent=2, sort_keys=True))
    for name in ARTIFACTS:
        click.echo(f"  {cfg.out_dir / name}")


@main.command()
@click.option("--prompt", required=True)
@click.option("--offline", is_flag=True, default=False)
@click.option("--seed", default=0, type=int)
@click.option("--out", default="design.json", type=click.Path())
def design(prompt, offline, seed, out):
    """Turn a prompt into the structured design template."""
    from .providers import design_scene

    spec = design_scene(prompt, _provider_from_options(offline, seed))
    Path(out).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    click.echo(out)


@main.command()
@click.option("--design", "design_path", default=None, type=click.Path(exists=True))
@click.option("--prompt", default="small riverside town")
@click.option("--offline", is_flag=True, default=False)
@click.option("--seed", default=0, type=int)
@click.option("--out", default="majutsu_out", type=click.Path())
def layout(design_path, prompt, offline, seed, out):
    """Generate the layout/height pair only."""
    from .layout import encode_height_image, encode_layout_image
    from .providers import DesignSpec, design_scene, generate_layout_pair

    cfg = _provider_from_options(offline, seed)
    if design_path:
        raw = json.loads(Path(design_path).read_text())
        spec = DesignSpec(
            layout_text=raw["layout"],
            assets_design=raw["assets"],
            materials_design=raw["materials"],
            skymap_design=raw["skymap"],
            style_tag=raw["style_tag"],
        )
    else:
        spec = design_scene(prompt, cfg)
    layout_map, hmap = generate_layout_pair(spec, cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "layout.png").write_bytes(encode_layout_image(layout_map))
    (out_dir / "height.png").write_bytes(encode_height_image(hmap, bits=16))
    click.echo(str(out_dir / "layout.png"))


@main.command()
@shared_options
def assemble(prompt, layout, height, offline, seed, libs, out, config, library_assets):
    """Assemble a scene from an existing layout/height pair."""
    if not (layout and height):
        raise click.UsageError("assemble needs --layout and --height")
    cfg = _common_pipeline_config(
        None, layout, height, offline, seed, libs, out, config, library_assets
    )
    report = run_pipeline(cfg)
    click.echo(report.artifacts["scene"])


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--command", "command_text", default=None, help="edit command text")
@click.option("--undo", "do_undo", is_flag=True, default=False)
@click.option("--redo", "do_redo", is_flag=True, default=False)
@click.option("--out", default=None, type=click.Path(), help="output path (default: in place)")
def edit(scene_path, command_text, do_undo, do_redo, out):
    """Apply one edit command (or undo/redo) to a saved scene document."""
    from . import editing
    from .scene import load_document, save_document

    doc = load_document(Path(scene_path).read_bytes())
    if sum(map(bool, (command_text, do_undo, do_redo))) != 1:
        raise click.UsageError("supply exactly one of --command, --undo, --redo")
    if command_text:
        new_doc = editing.apply_command(doc, editing.parse_command(command_text))
    elif do_undo:
        new_doc = editing.undo(doc)
    else:
        new_doc = editing.redo(doc)
    Path(out or scene_path).write_bytes(save_document(new_doc))
    click.echo(json.dumps(editing.doc_diff(doc, new_doc), indent=2, sort_keys=True))


@main.group()
def eval():
    """Evaluation stack: metrics, schedules, and leaderboards."""


@eval.command()
@click.argument("features_a", type=click.Path(exists=True))
@click.argument("features_b", type=click.Path(exists=True))
def fid(features_a, features_b):
    """FID between two feature files (MCFV1 or CSV)."""
    from .metrics import compute_fid, load_features

    a = load_features(Path(features_a).read_bytes(), source=features_a)
    b = load_features(Path(features_b).read_bytes(), source=features_b)
    click.echo(f"{compute_fid(a, b):.6f}")


@eval.command()
@click.argument("features_a", type=click.Path(exists=True))
@click.argument("features_b", type=click.Path(exists=True))
def kid(features_a, features_b):
    """Unbiased KID between two feature files."""
    from .metrics import compute_kid, load_features

    a = load_features(Path(features_a).read_bytes(), source=features_a)
    b = load_features(Path(features_b).read_bytes(), source=features_b)
    click.echo(f"{compute_kid(a, b):.6f}")


@eval.command(name="is")
@click.argument("probs_csv", type=click.Path(exists=True))
def inception_score(probs_csv):
    """Inception-style score of an n x C class-probability CSV."""
    import numpy as np

    from .metrics import compute_is

    probs = np.loadtxt(probs_csv, delimiter=",", ndmin=2)
    click.echo(f"{compute_is(probs):.6f}")


@eval.command()
@click.option("--images", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--dimension", default="SVC")
@click.option("--seed", default=0, type=int)
@click.option("--out", default="schedule.json", type=click.Path())
def schedule(manifest_path, dimension, seed, out):
    """Build a pairwise comparison schedule from {method: [image ids]}."""
    from .ranking import schedule_comparisons

    manifest = json.loads(Path(manifest_path).read_text())
    images = manifest.get("methods", manifest)
    pairs = schedule_comparisons(images, dimension, seed=seed)
    Path(out).write_text(json.dumps(pairs, indent=2, sort_keys=True))
    click.echo(f"{len(pairs)} pairs -> {out}")


@eval.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--methods", default=None, help="comma-separated method list")
def rank(records_path, methods):
    """Fold comparison records into per-dimension leaderboards."""
    from .ranking import rank_methods, records_from_jsonl

    records = records_from_jsonl(Path(records_path).read_text())
    boards = rank_methods(records, methods=methods.split(",") if methods else None)
    out = {
        dim: [row.to_dict() for row in rows] for dim, rows in boards.items()
    }
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8420, type=int)
@click.option("--state-dir", default="majutsu_state", type=click.Path())
@click.option("--eval-manifest", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
def serve(host, port, state_dir, eval_manifest, seed):
    """Serve the session/editing/judging HTTP API."""
    from .server import serve as run_server

    run_server(
        host=host,
        port=port,
        state_dir=state_dir,
        eval_manifest_path=eval_manifest,
        seed=seed,
    )


@main.command()
@click.option("--out", default="majutsu_library", type=click.Path())
def libgen(out):
    """Write the built-in offline asset/material/skybox library."""
    from .libraries import generate_default_library

    click.echo(str(generate_default_library(Path(out))))


if __name__ == "__main__":
    sys.exit(main())
