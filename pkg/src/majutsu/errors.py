"""Exception types shared across the majutsu package."""

from __future__ import annotations


class MajutsuError(Exception):
    """Base class for all package-specific errors."""


# -- raster / layout decoding ------------------------------------------------

class CorruptImage(MajutsuError):
    pass


class NonPaletteColor(MajutsuError):
    def __init__(self, x: int, y: int, rgb: tuple[int, int, int]):
        super().__init__(f"non-palette color {rgb} at pixel ({x}, {y})")
        self.x = x
        self.y = y
        self.rgb = rgb


class NegativeHMax(MajutsuError):
    pass


class DimensionMismatch(MajutsuError):
    pass


class EmptyMask(MajutsuError):
    pass


class MultipleComponents(MajutsuError):
    pass


# -- geometry ----------------------------------------------------------------

class ZeroHeight(MajutsuError):
    pass


class InvalidPolygon(MajutsuError):
    pass


class EmptyInput(MajutsuError):
    pass


class DegenerateAsset(MajutsuError):
    pass


class DegenerateOBB(MajutsuError):
    pass


class EmptyMesh(MajutsuError):
    pass


class ResolutionMismatch(MajutsuError):
    pass


# -- scene document ----------------------------------------------------------

class MissingAsset(MajutsuError):
    def __init__(self, instance_id: str):
        super().__init__(f"no asset mapped for building instance {instance_id!r}")
        self.instance_id = instance_id


class MaterialMissing(MajutsuError):
    def __init__(self, layer: str):
        super().__init__(f"no material bound for layer {layer!r}")
        self.layer = layer


class SerializationFailure(MajutsuError):
    pass


class UnknownVersion(MajutsuError):
    pass


class SchemaViolation(MajutsuError):
    def __init__(self, path: str, message: str = ""):
        super().__init__(f"schema violation at {path}" + (f": {message}" if message else ""))
        self.path = path


# -- edit engine -------------------------------------------------------------

class ParseError(MajutsuError):
    def __init__(self, position: int, expected: str, text: str = ""):
        super().__init__(f"parse error at position {position}: expected {expected}")
        self.position = position
        self.expected = expected
        self.text = text


class UnknownInstance(MajutsuError):
    pass


class UnknownMaterial(MajutsuError):
    pass


class OutOfBounds(MajutsuError):
    pass


class InvalidPatch(MajutsuError):
    def __init__(self, key: str):
        super().__init__(f"unknown or invalid attribute key {key!r}")
        self.key = key


class NothingToUndo(MajutsuError):
    pass


class NothingToRedo(MajutsuError):
    pass


# -- providers ---------------------------------------------------------------

class ProviderUnavailable(MajutsuError):
    pass


class IncompleteSpec(MajutsuError):
    def __init__(self, section: str):
        super().__init__(f"design spec is missing section {section!r}")
        self.section = section


class InvalidProviderOutput(MajutsuError):
    def __init__(self, reason: str):
        super().__init__(f"provider returned invalid output: {reason}")
        self.reason = reason


class RefineExhausted(MajutsuError):
    def __init__(self, best_score: float):
        super().__init__(f"refine loop exhausted; best silhouette score {best_score:.4f}")
        self.best_score = best_score


class MissingMap(MajutsuError):
    def __init__(self, material_id: str, map_kind: str):
        super().__init__(f"material {material_id!r} lacks the {map_kind!r} map")
        self.material_id = material_id
        self.map_kind = map_kind


class DanglingURI(MajutsuError):
    pass


class DuplicateId(MajutsuError):
    pass


class EmptyLibrary(MajutsuError):
    pass


# -- evaluation --------------------------------------------------------------

class TooFewSamples(MajutsuError):
    pass


class TooFewMethods(MajutsuError):
    pass


class NotADistribution(MajutsuError):
    def __init__(self, row: int):
        super().__init__(f"row {row} is not a probability distribution")
        self.row = row


class EmptyScores(MajutsuError):
    pass
