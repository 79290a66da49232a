from __future__ import annotations

import json
import math

import numpy as np
import pytest

from majutsu.editing import (
    EditCommand,
    apply_command,
    can_redo,
    can_undo,
    doc_diff,
    parse_command,
    redo,
    replay,
    undo,
)
from majutsu.errors import (
    InvalidPatch,
    NothingToRedo,
    NothingToUndo,
    OutOfBounds,
    ParseError,
    UnknownInstance,
    UnknownMaterial,
)
from majutsu.scene import content_bytes, content_equal, save_document

from conftest import build_scene


class TestParse:
    def test_delete(self):
        cmd = parse_command("delete bldg_0007")
        assert cmd.variant == "delete"
        assert cmd.payload["instance_id"] == "bldg_0007"

    def test_move_with_rotate(self):
        cmd = parse_command("move bldg_0007 by (10,0) rotate 0.5")
        assert cmd.variant == "move"
        assert cmd.payload["delta"] == [10.0, 0.0, 0.0]
        assert cmd.payload["rotate"] == 0.5
        assert cmd.payload["scale"] == 1.0

    def test_move_3d_with_scale(self):
        cmd = parse_command("move x by (1,2,3) scale 2")
        assert cmd.payload["delta"] == [1.0, 2.0, 3.0]
        assert cmd.payload["scale"] == 2.0

    def test_replace_layer(self):
        cmd = parse_command("replace road with asphalt_02")
        assert cmd.variant == "replace"
        assert cmd.payload["target"] == {"layer": "road"}
        assert cmd.payload["material_id"] == "asphalt_02"
        assert cmd.payload["surface"] is None

    def test_replace_instance_surface(self):
        cmd = parse_command("replace bldg_0001.facade with brick_03")
        assert cmd.payload["target"] == {"instance": "bldg_0001"}
        assert cmd.payload["surface"] == "facade"

    def test_add_full(self):
        cmd = parse_command("add tree_oak at (10.5,20) yaw 1.2 scale 2.0")
        assert cmd.variant == "add"
        assert cmd.payload["category"] == "tree"
        p = cmd.payload["placement"]
        assert p["translation"] == [10.5, 20.0, 0.0]
        assert p["yaw"] == 1.2
        assert p["xy_scale"] == 2.0

    def test_edit_numeric_value(self):
        cmd = parse_command("edit bldg_0001 set height=55.5")
        assert cmd.payload["patch"] == {"height": 55.5}

    def test_edit_string_value(self):
        cmd = parse_command("edit bldg_0001 set tint=red")
        assert cmd.payload["patch"] == {"tint": "red"}

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_command("move bldg_0001 by 10,0")
        assert err.value.expected == "'('"
        assert err.value.position == 18

    def test_unknown_verb(self):
        with pytest.raises(ParseError):
            parse_command("teleport bldg_0001")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse_command("delete bldg_0001 now")

    def test_json_round_trip(self):
        cmd = parse_command("move a by (1,2) rotate 0.5 scale 2")
        again = EditCommand.from_dict(json.loads(json.dumps(cmd.to_dict())))
        assert again == cmd


class TestApply:
    def test_add_then_delete_restores_content(self):
        doc = build_scene()
        after_add = apply_command(doc, parse_command("add tree_oak at (60,60)"))
        new_ids = {i.id for i in after_add.instances} - {i.id for i in doc.instances}
        assert len(new_ids) == 1
        new_id = new_ids.pop()
        after_delete = apply_command(after_add, parse_command(f"delete {new_id}"))
        assert content_equal(after_delete, doc)
        assert after_delete.revision == doc.revision + 2
        assert len(after_delete.edit_log) == 2

    def test_move_composes(self):
        doc = build_scene()
        m1 = parse_command("move bldg_0000 by (5,0)")
        twice = apply_command(apply_command(doc, m1), m1)
        once = apply_command(doc, parse_command("move bldg_0000 by (10,0)"))
        a = twice.instance("bldg_0000").placement
        b = once.instance("bldg_0000").placement
        assert np.allclose(a.translation, b.translation, atol=1e-9)
        assert a.yaw == pytest.approx(b.yaw, abs=1e-12)

    def test_move_scale_and_rotation_compose(self):
        doc = build_scene()
        p0 = doc.instance("bldg_0000").placement
        moved = apply_command(doc, parse_command("move bldg_0000 by (0,0) rotate 0.5 scale 2"))
        moved = apply_command(moved, parse_command("move bldg_0000 by (0,0) rotate 0.25 scale 3"))
        p = moved.instance("bldg_0000").placement
        assert p.yaw == pytest.approx((p0.yaw + 0.75) % (2 * math.pi))
        assert p.xy_scale == pytest.approx(p0.xy_scale * 6.0)
        assert p.z_scale == pytest.approx(p0.z_scale * 6.0)

    def test_delete_unknown(self):
        doc = build_scene()
        with pytest.raises(UnknownInstance):
            apply_command(doc, parse_command("delete ghost"))

    def test_add_out_of_bounds(self):
        doc = build_scene()  # map is 128 m x 128 m
        with pytest.raises(OutOfBounds):
            apply_command(doc, parse_command("add tree_a at (500,10)"))

    def test_edit_unknown_key(self):
        doc = build_scene()
        with pytest.raises(InvalidPatch):
            apply_command(doc, parse_command("edit bldg_0000 set wings=4"))

    def test_edit_material_validated(self):
        doc = build_scene()
        with pytest.raises(UnknownMaterial):
            apply_command(doc, parse_command("edit bldg_0000 set material=missing_mat"))
        ok = apply_command(doc, parse_command("edit bldg_0000 set material=asphalt_02"))
        assert ok.instance("bldg_0000").attribute_overrides["material"] == "asphalt_02"

    def test_edit_height_rescales(self):
        doc = build_scene()
        edited = apply_command(doc, parse_command("edit bldg_0000 set height=60"))
        # asset_box is 1 m tall, so z_scale equals world height
        assert edited.instance("bldg_0000").placement.z_scale == pytest.approx(60.0)

    def test_replace_layer_material(self):
        doc = build_scene()
        out = apply_command(doc, parse_command("replace road with asphalt_02"))
        assert out.layer("road").material_id == "asphalt_02"
        with pytest.raises(UnknownMaterial):
            apply_command(doc, parse_command("replace road with nope"))

    def test_replace_instance_surface_slot(self):
        doc = build_scene()
        out = apply_command(doc, parse_command("replace bldg_0000.facade with asphalt_02"))
        assert out.instance("bldg_0000").attribute_overrides["material:facade"] == "asphalt_02"

    def test_locality(self):
        doc = build_scene(n_buildings=3, n_trees=2)
        out = apply_command(doc, parse_command("move bldg_0001 by (3,4)"))
        before = json.loads(content_bytes(doc))
        after = json.loads(content_bytes(out))
        assert before["layers"] == after["layers"]
        assert before["skybox"] == after["skybox"]
        assert before["materials"] == after["materials"]
        changed = [
            (a["id"])
            for a, b in zip(before["instances"], after["instances"])
            if a != b
        ]
        assert changed == ["bldg_0001"]


class TestUndoRedo:
    def test_undo_move_restores(self):
        doc = build_scene()
        moved = apply_command(doc, parse_command("move bldg_0000 by (10,5) rotate 0.3 scale 1.7"))
        back = undo(moved)
        assert content_equal(back, doc)
        assert back.revision == moved.revision + 1  # revision stays monotone

    def test_undo_on_fresh_document(self):
        doc = build_scene()
        with pytest.raises(NothingToUndo):
            undo(doc)

    def test_redo_stack_semantics(self):
        doc = build_scene()
        a = apply_command(doc, parse_command("move bldg_0000 by (1,0)"))
        b = apply_command(a, parse_command("move bldg_0000 by (0,1)"))
        undone = undo(b)
        assert content_equal(undone, a)
        redone = redo(undone)
        assert content_equal(redone, b)

    def test_redo_without_undo(self):
        doc = build_scene()
        a = apply_command(doc, parse_command("move bldg_0000 by (1,0)"))
        with pytest.raises(NothingToRedo):
            redo(a)

    def test_apply_clears_redo(self):
        doc = build_scene()
        a = apply_command(doc, parse_command("move bldg_0000 by (1,0)"))
        undone = undo(a)
        assert can_redo(undone)
        c = apply_command(undone, parse_command("move bldg_0000 by (2,0)"))
        assert not can_redo(c)
        assert can_undo(c)

    def test_undo_delete_restores_position_in_list(self):
        doc = build_scene(n_buildings=3)
        removed = apply_command(doc, parse_command("delete bldg_0001"))
        back = undo(removed)
        assert [i.id for i in back.instances] == [i.id for i in doc.instances]
        assert content_equal(back, doc)

    def test_undo_edit_and_replace(self):
        doc = build_scene()
        e = apply_command(doc, parse_command("edit bldg_0000 set height=77"))
        assert content_equal(undo(e), doc)
        r = apply_command(doc, parse_command("replace bldg_0000 with asphalt_02"))
        assert content_equal(undo(r), doc)
        r2 = apply_command(doc, parse_command("replace ground with asphalt_02"))
        assert content_equal(undo(r2), doc)


def random_command(rng, doc) -> EditCommand:
    choice = rng.integers(0, 5)
    ids = [i.id for i in doc.instances]
    if choice == 0 or not ids:
        x = float(rng.random() * 120)
        y = float(rng.random() * 120)
        ref = rng.choice(["tree_a", "lamp_b", "shed_c"])
        return parse_command(f"add {ref} at ({x:.3f},{y:.3f}) yaw {rng.random():.3f}")
    target = ids[int(rng.integers(len(ids)))]
    if choice == 1:
        return parse_command(f"delete {target}")
    if choice == 2:
        key, value = [
            ("height", f"{10 + 90 * rng.random():.2f}"),
            ("tint", "blue"),
            ("material", "asphalt_02"),
        ][int(rng.integers(3))]
        return parse_command(f"edit {target} set {key}={value}")
    if choice == 3:
        return parse_command(
            f"move {target} by ({rng.random() * 10 - 5:.3f},{rng.random() * 10 - 5:.3f})"
            f" rotate {rng.random():.3f} scale {0.5 + rng.random():.3f}"
        )
    if rng.random() < 0.5:
        layer = ["ground", "road", "water", "vegetation"][int(rng.integers(4))]
        return parse_command(f"replace {layer} with asphalt_02")
    return parse_command(f"replace {target} with asphalt_02")


class TestAlgebraRandomized:
    def test_inverse_and_replay_laws(self, rng):
        base = build_scene(n_buildings=3, n_trees=3, n_lamps=1)
        doc = base
        for step in range(60):
            cmd = random_command(rng, doc)
            try:
                out = apply_command(doc, cmd)
            except Exception:
                continue
            # inverse law
            assert content_equal(undo(out), doc)
            doc = out
        # replay law: bit-exact under canonical serialization
        replayed = replay(base, doc.edit_log)
        assert save_document(replayed) == save_document(doc)


class TestDiff:
    def test_diff_shapes(self):
        doc = build_scene(n_buildings=2)
        moved = apply_command(doc, parse_command("move bldg_0000 by (1,1)"))
        d = doc_diff(doc, moved)
        assert d["modified_instances"] == ["bldg_0000"]
        assert d["added_instances"] == []
        assert d["revision"] == moved.revision
        deleted = apply_command(moved, parse_command("delete bldg_0001"))
        d2 = doc_diff(moved, deleted)
        assert d2["removed_instances"] == ["bldg_0001"]
