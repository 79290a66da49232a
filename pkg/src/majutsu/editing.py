"""The five atomic scene operations: Add, Delete, Edit, Move, Replace.

Commands parse from a canonical text grammar or JSON, apply immutably with a
computed exact inverse appended to the edit log, and support undo/redo by
folding inverses back through the log. Replaying a document's edit log over
its assembled ancestor reproduces the live document bit-exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidPatch,
    NothingToRedo,
    NothingToUndo,
    OutOfBounds,
    ParseError,
    UnknownInstance,
    UnknownMaterial,
)
from .geometry import SimilarityPlacement
from .scene import (
    LAYER_KINDS,
    AssetInstance,
    SceneDocument,
    _instance_from_dict,
    _instance_to_dict,
    _placement_to_dict,
    placement_from_dict,
    with_fields,
)

VARIANTS = ("add", "delete", "edit", "move", "replace")
EDITABLE_KEYS = ("height", "tint", "material", "asset_ref")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EditCommand:
    variant: str
    payload: dict

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown command variant {self.variant!r}")
        if self.variant == "move" and self.payload.get("scale", 1.0) <= 0:
            raise ValueError("move scale must be > 0")

    def to_dict(self) -> dict:
        return {"op": self.variant, **self.payload}

    @staticmethod
    def from_dict(obj: dict) -> "EditCommand":
        if not isinstance(obj, dict) or "op" not in obj:
            raise ValueError("command object needs an 'op' field")
        payload = {k: v for k, v in obj.items() if k != "op"}
        return EditCommand(variant=obj["op"], payload=payload)


def infer_category(asset_ref: str) -> str:
    low = asset_ref.lower()
    if "tree" in low:
        return "tree"
    if "light" in low or "lamp" in low:
        return "streetlight"
    return "building"


# -- text grammar -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_:/\-]*)"
    r"|(?P<punct>[(),=.]))"
)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                if text[pos:].strip() == "":
                    break
                raise ParseError(pos, "a token", text)
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.index = 0

    def peek(self):
        return self.items[self.index] if self.index < len(self.items) else None

    def next(self, expected: str):
        tok = self.peek()
        if tok is None:
            raise ParseError(len(self.text), expected, self.text)
        self.index += 1
        return tok

    def expect_punct(self, char: str):
        kind, value, pos = self.next(f"'{char}'")
        if kind != "punct" or value != char:
            raise ParseError(pos, f"'{char}'", self.text)
        return value

    def expect_ident(self, what: str = "an identifier") -> str:
        kind, value, pos = self.next(what)
        if kind != "ident":
            raise ParseError(pos, what, self.text)
        return value

    def expect_keyword(self, word: str):
        kind, value, pos = self.next(f"'{word}'")
        if kind != "ident" or value != word:
            raise ParseError(pos, f"'{word}'", self.text)

    def expect_number(self) -> float:
        kind, value, pos = self.next("a number")
        if kind != "num":
            raise ParseError(pos, "a number", self.text)
        return float(value)

    def try_keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok and tok[0] == "ident" and tok[1] == word:
            self.index += 1
            return True
        return False

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise ParseError(tok[2], "end of command", self.text)


def parse_command(text: str) -> EditCommand:
    """Parse the canonical grammar:

    add <asset_ref> at (x,y) [yaw r] [scale s]
    delete <id>
    edit <id> set <key>=<value>
    move <id> by (dx,dy[,dz]) [rotate r] [scale s]
    replace <layer|id>[.<surface>] with <material_id>
    """
    toks = _Tokens(text)
    kind, verb, pos = toks.next("a command verb")
    if kind != "ident" or verb not in VARIANTS:
        raise ParseError(pos, "one of add/delete/edit/move/replace", text)

    if verb == "add":
        asset_ref = toks.expect_ident("an asset reference")
        toks.expect_keyword("at")
        toks.expect_punct("(")
        x = toks.expect_number()
        toks.expect_punct(",")
        y = toks.expect_number()
        toks.expect_punct(")")
        yaw = toks.expect_number() if toks.try_keyword("yaw") else 0.0
        scale = toks.expect_number() if toks.try_keyword("scale") else 1.0
        toks.done()
        payload = {
            "asset_ref": asset_ref,
            "category": infer_category(asset_ref),
            "placement": {
                "translation": [x, y, 0.0],
                "yaw": yaw,
                "xy_scale": scale,
                "z_scale": scale,
            },
        }
        return EditCommand("add", payload)

    if verb == "delete":
        instance_id = toks.expect_ident("an instance id")
        toks.done()
        return EditCommand("delete", {"instance_id": instance_id})

    if verb == "edit":
        instance_id = toks.expect_ident("an instance id")
        toks.expect_keyword("set")
        key = toks.expect_ident("an attribute key")
        toks.expect_punct("=")
        tok = toks.peek()
        if tok is None:
            raise ParseError(len(text), "a value", text)
        if tok[0] == "num":
            value: object = float(toks.next("a value")[1])
        else:
            value = toks.expect_ident("a value")
        toks.done()
        return EditCommand("edit", {"instance_id": instance_id, "patch": {key: value}})

    if verb == "move":
        instance_id = toks.expect_ident("an instance id")
        toks.expect_keyword("by")
        toks.expect_punct("(")
        dx = toks.expect_number()
        toks.expect_punct(",")
        dy = toks.expect_number()
        dz = 0.0
        tok = toks.peek()
        if tok and tok[0] == "punct" and tok[1] == ",":
            toks.expect_punct(",")
            dz = toks.expect_number()
        toks.expect_punct(")")
        rotate = toks.expect_number() if toks.try_keyword("rotate") else 0.0
        scale = toks.expect_number() if toks.try_keyword("scale") else 1.0
        toks.done()
        return EditCommand(
            "move",
            {"instance_id": instance_id, "delta": [dx, dy, dz], "rotate": rotate, "scale": scale},
        )

    # replace
    target = toks.expect_ident("a layer kind or instance id")
    surface = None
    tok = toks.peek()
    if tok and tok[0] == "punct" and tok[1] == ".":
        toks.expect_punct(".")
        surface = toks.expect_ident("a surface name")
    toks.expect_keyword("with")
    material_id = toks.expect_ident("a material id")
    toks.done()
    key = "layer" if target in LAYER_KINDS else "instance"
    return EditCommand(
        "replace", {"target": {key: target}, "surface": surface, "material_id": material_id}
    )


# -- application ------------------------------------------------------------------


def _find_instance(doc: SceneDocument, instance_id: str) -> int:
    for i, inst in enumerate(doc.instances):
        if inst.id == instance_id:
            return i
    raise UnknownInstance(f"no instance with id {instance_id!r}")


def _next_user_id(doc: SceneDocument) -> str:
    taken = {inst.id for inst in doc.instances}
    n = 0
    while f"user_{n:04d}" in taken:
        n += 1
    return f"user_{n:04d}"


def _apply_content(doc: SceneDocument, cmd: EditCommand) -> tuple[dict, EditCommand]:
    """Apply a command to content fields; returns (changed fields, exact inverse)."""
    payload = cmd.payload

    if cmd.variant == "add":
        if "restore" in payload:
            inst = _instance_from_dict(payload["restore"], "restore")
            index = int(payload.get("index", len(doc.instances)))
        else:
            placement = placement_from_dict(payload["placement"])
            width_m, height_m = doc.map_size_m()
            x, y = placement.translation[0], placement.translation[1]
            if not (0.0 <= x <= width_m and 0.0 <= y <= height_m):
                raise OutOfBounds(
                    f"placement ({x:.1f}, {y:.1f}) outside map {width_m:.0f}x{height_m:.0f} m"
                )
            inst = AssetInstance(
                id=payload.get("instance_id") or _next_user_id(doc),
                asset_ref=payload["asset_ref"],
                category=payload.get("category") or infer_category(payload["asset_ref"]),
                placement=placement,
                attribute_overrides=dict(payload.get("overrides", {})),
            )
            index = len(doc.instances)
        if any(existing.id == inst.id for existing in doc.instances):
            raise ValueError(f"instance id {inst.id!r} already exists")
        instances = list(doc.instances)
        instances.insert(index, inst)
        inverse = EditCommand("delete", {"instance_id": inst.id})
        return {"instances": tuple(instances)}, inverse

    if cmd.variant == "delete":
        index = _find_instance(doc, payload["instance_id"])
        removed = doc.instances[index]
        instances = list(doc.instances)
        instances.pop(index)
        inverse = EditCommand(
            "add", {"restore": _instance_to_dict(removed), "index": index}
        )
        return {"instances": tuple(instances)}, inverse

    if cmd.variant == "edit":
        index = _find_instance(doc, payload["instance_id"])
        inst = doc.instances[index]
        patch = payload.get("patch", {})
        overrides = dict(inst.attribute_overrides)
        placement = inst.placement
        asset_ref = inst.asset_ref
        inverse_patch: dict = {}
        for key, value in patch.items():
            if key not in EDITABLE_KEYS:
                raise InvalidPatch(key)
            if key == "height":
                if not isinstance(value, (int, float)) or value <= 0:
                    raise InvalidPatch(key)
                mesh = doc.asset_meshes.get(inst.asset_ref)
                asset_h = float(mesh.bounds()[1][2] - mesh.bounds()[0][2]) if mesh else 1.0
                if asset_h <= 0:
                    asset_h = 1.0
                inverse_patch[key] = placement.z_scale * asset_h
                placement = SimilarityPlacement(
                    translation=placement.translation,
                    yaw=placement.yaw,
                    xy_scale=placement.xy_scale,
                    z_scale=float(value) / asset_h,
                )
            elif key == "asset_ref":
                if not isinstance(value, str) or not value:
                    raise InvalidPatch(key)
                inverse_patch[key] = asset_ref
                asset_ref = value
            else:  # tint, material
                if key == "material" and value is not None and value not in doc.materials:
                    raise UnknownMaterial(f"unknown material {value!r}")
                inverse_patch[key] = overrides.get(key)
                if value is None:
                    overrides.pop(key, None)
                else:
                    overrides[key] = value
        if "restore_placement" in payload:
            placement = placement_from_dict(payload["restore_placement"], "restore_placement")
        inverse_payload = {"instance_id": inst.id, "patch": inverse_patch}
        if "height" in patch or "restore_placement" in payload:
            inverse_payload["restore_placement"] = _placement_to_dict(inst.placement)
        new_inst = AssetInstance(
            id=inst.id,
            asset_ref=asset_ref,
            category=inst.category,
            placement=placement,
            attribute_overrides=overrides,
        )
        instances = list(doc.instances)
        instances[index] = new_inst
        return {"instances": tuple(instances)}, EditCommand("edit", inverse_payload)

    if cmd.variant == "move":
        index = _find_instance(doc, payload["instance_id"])
        inst = doc.instances[index]
        if "restore_placement" in payload:
            placement = placement_from_dict(payload["restore_placement"], "restore_placement")
        else:
            delta = payload.get("delta", [0.0, 0.0, 0.0])
            if len(delta) == 2:
                delta = [delta[0], delta[1], 0.0]
            scale = float(payload.get("scale", 1.0))
            if scale <= 0:
                raise InvalidPatch("scale")
            p = inst.placement
            placement = SimilarityPlacement(
                translation=p.translation + np.asarray(delta, dtype=np.float64),
                yaw=(p.yaw + float(payload.get("rotate", 0.0))) % TWO_PI,
                xy_scale=p.xy_scale * scale,
                z_scale=p.z_scale * scale,
            )
        inverse = EditCommand(
            "move",
            {
                "instance_id": inst.id,
                "restore_placement": _placement_to_dict(inst.placement),
            },
        )
        new_inst = AssetInstance(
            id=inst.id,
            asset_ref=inst.asset_ref,
            category=inst.category,
            placement=placement,
            attribute_overrides=inst.attribute_overrides,
        )
        instances = list(doc.instances)
        instances[index] = new_inst
        return {"instances": tuple(instances)}, inverse

    # replace
    target = payload["target"]
    material_id = payload["material_id"]
    if material_id is not None and material_id not in doc.materials:
        raise UnknownMaterial(f"unknown material {material_id!r}")
    if "layer" in target:
        kind = target["layer"]
        if kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        if material_id is None:
            raise UnknownMaterial("layers always need a material")
        layer_index = LAYER_KINDS.index(kind)
        layer = doc.layers[layer_index]
        inverse = EditCommand(
            "replace",
            {"target": {"layer": kind}, "surface": payload.get("surface"), "material_id": layer.material_id},
        )
        from .scene import Layer

        layers = list(doc.layers)
        layers[layer_index] = Layer(kind=kind, mesh=layer.mesh, material_id=material_id)
        return {"layers": tuple(layers)}, inverse

    instance_id = target["instance"]
    index = _find_instance(doc, instance_id)
    inst = doc.instances[index]
    surface = payload.get("surface")
    slot = "material" if surface is None else f"material:{surface}"
    overrides = dict(inst.attribute_overrides)
    previous = overrides.get(slot)
    if material_id is None:
        overrides.pop(slot, None)
    else:
        overrides[slot] = material_id
    inverse = EditCommand(
        "replace",
        {"target": {"instance": instance_id}, "surface": surface, "material_id": previous},
    )
    new_inst = AssetInstance(
        id=inst.id,
        asset_ref=inst.asset_ref,
        category=inst.category,
        placement=inst.placement,
        attribute_overrides=overrides,
    )
    instances = list(doc.instances)
    instances[index] = new_inst
    return {"instances": tuple(instances)}, inverse


def _append_entry(
    doc: SceneDocument, changes: dict, cmd: EditCommand, inverse: EditCommand, kind: str, target: int | None
) -> SceneDocument:
    entry = {
        "command": cmd.to_dict(),
        "inverse": inverse.to_dict(),
        "revision": doc.revision + 1,
        "kind": kind,
    }
    if target is not None:
        entry["target"] = target
    return with_fields(
        doc,
        revision=doc.revision + 1,
        edit_log=doc.edit_log + (entry,),
        **changes,
    )


def apply_command(doc: SceneDocument, cmd: EditCommand) -> SceneDocument:
    """Apply one command; returns a new document with revision+1 and the log
    extended by (command, computed inverse)."""
    changes, inverse = _apply_content(doc, cmd)
    return _append_entry(doc, changes, cmd, inverse, "apply", None)


def _stacks(doc: SceneDocument) -> tuple[list[int], list[int]]:
    undo_stack: list[int] = []
    redo_stack: list[int] = []
    for i, entry in enumerate(doc.edit_log):
        kind = entry.get("kind", "apply")
        if kind == "apply":
            undo_stack.append(i)
            redo_stack.clear()
        elif kind == "undo":
            if undo_stack:
                redo_stack.append(undo_stack.pop())
        elif kind == "redo":
            if redo_stack:
                undo_stack.append(redo_stack.pop())
    return undo_stack, redo_stack


def undo(doc: SceneDocument) -> SceneDocument:
    undo_stack, _ = _stacks(doc)
    if not undo_stack:
        raise NothingToUndo("nothing to undo")
    target = undo_stack[-1]
    inverse_cmd = EditCommand.from_dict(doc.edit_log[target]["inverse"])
    changes, anti = _apply_content(doc, inverse_cmd)
    return _append_entry(doc, changes, inverse_cmd, anti, "undo", target)


def redo(doc: SceneDocument) -> SceneDocument:
    _, redo_stack = _stacks(doc)
    if not redo_stack:
        raise NothingToRedo("nothing to redo")
    target = redo_stack[-1]
    cmd = EditCommand.from_dict(doc.edit_log[target]["command"])
    changes, inverse = _apply_content(doc, cmd)
    return _append_entry(doc, changes, cmd, inverse, "redo", target)


def can_undo(doc: SceneDocument) -> bool:
    return bool(_stacks(doc)[0])


def can_redo(doc: SceneDocument) -> bool:
    return bool(_stacks(doc)[1])


def replay(base: SceneDocument, edit_log: tuple[dict, ...]) -> SceneDocument:
    """Fold a recorded edit log over its assembled ancestor."""
    doc = base
    for entry in edit_log:
        cmd = EditCommand.from_dict(entry["command"])
        changes, inverse = _apply_content(doc, cmd)
        doc = _append_entry(
            doc, changes, cmd, inverse, entry.get("kind", "apply"), entry.get("target")
        )
    return doc


# -- structural diff ---------------------------------------------------------------


def doc_diff(before: SceneDocument, after: SceneDocument) -> dict:
    """Shallow structural diff for clients animating a command's effect."""
    before_ids = {i.id: i for i in before.instances}
    after_ids = {i.id: i for i in after.instances}
    added = [iid for iid in after_ids if iid not in before_ids]
    removed = [iid for iid in before_ids if iid not in after_ids]
    modified = [
        iid
        for iid, inst in after_ids.items()
        if iid in before_ids
        and _instance_to_dict(before_ids[iid]) != _instance_to_dict(inst)
    ]
    layers_changed = [
        a.kind
        for b, a in zip(before.layers, after.layers)
        if b.material_id != a.material_id
    ]
    return {
        "added_instances": sorted(added),
        "removed_instances": sorted(removed),
        "modified_instances": sorted(modified),
        "layers_changed": layers_changed,
        "revision": after.revision,
    }
