"""
Edit operation model: the typed form of an object-level edit instruction.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, Tuple, Union

from backend.exceptions import InvalidEditOp
from backend.geometry import BoundingBox


class EditCategory(str, Enum):
    MOVE = "Move"
    SCALE = "Scale"
    FLIP = "Flip"
    SHEAR = "Shear"
    ROTATE = "Rotate"
    REASON = "Reason"
    MIX = "Mix"


# Table column order
CATEGORY_ORDER = (
    EditCategory.MOVE,
    EditCategory.SCALE,
    EditCategory.FLIP,
    EditCategory.SHEAR,
    EditCategory.ROTATE,
    EditCategory.REASON,
    EditCategory.MIX,
)


def _finite(op_name: str, **values: float):
    for name, value in values.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InvalidEditOp(f"{op_name}.{name} must be a finite number, got {value!r}")


@dataclass(frozen=True)
class Move:
    kind: ClassVar[str] = "move"
    dx: float
    dy: float

    def __post_init__(self):
        _finite("Move", dx=self.dx, dy=self.dy)


@dataclass(frozen=True)
class ScaleBy:
    kind: ClassVar[str] = "scale_by"
    sx: float
    sy: float

    def __post_init__(self):
        _finite("ScaleBy", sx=self.sx, sy=self.sy)
        if self.sx <= 0 or self.sy <= 0:
            raise InvalidEditOp(f"ScaleBy factors must be strictly positive, got ({self.sx}, {self.sy})")


@dataclass(frozen=True)
class ScaleToWidth:
    kind: ClassVar[str] = "scale_to_width"
    w: float
    uniform: bool = True

    def __post_init__(self):
        _finite("ScaleToWidth", w=self.w)
        if self.w <= 0:
            raise InvalidEditOp(f"ScaleToWidth target must be strictly positive, got {self.w}")


@dataclass(frozen=True)
class ScaleToHeight:
    kind: ClassVar[str] = "scale_to_height"
    h: float
    uniform: bool = True

    def __post_init__(self):
        _finite("ScaleToHeight", h=self.h)
        if self.h <= 0:
            raise InvalidEditOp(f"ScaleToHeight target must be strictly positive, got {self.h}")


@dataclass(frozen=True)
class Rotate:
    """Counter-clockwise positive in the mathematical convention, applied in screen coordinates"""

    kind: ClassVar[str] = "rotate"
    degrees: float

    def __post_init__(self):
        _finite("Rotate", degrees=self.degrees)


@dataclass(frozen=True)
class FlipHorizontal:
    kind: ClassVar[str] = "flip_horizontal"


@dataclass(frozen=True)
class FlipVertical:
    kind: ClassVar[str] = "flip_vertical"


@dataclass(frozen=True)
class Shear:
    kind: ClassVar[str] = "shear"
    kx: float
    ky: float

    def __post_init__(self):
        _finite("Shear", kx=self.kx, ky=self.ky)


@dataclass(frozen=True)
class Sequence:
    kind: ClassVar[str] = "sequence"
    ops: Tuple["EditOp", ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops:
            raise InvalidEditOp("Sequence must hold at least one operation")


EditOp = Union[Move, ScaleBy, ScaleToWidth, ScaleToHeight, Rotate, FlipHorizontal, FlipVertical, Shear, Sequence]

OP_TYPES = {cls.kind: cls for cls in (
    Move, ScaleBy, ScaleToWidth, ScaleToHeight, Rotate, FlipHorizontal, FlipVertical, Shear, Sequence,
)}


@dataclass(frozen=True)
class ObjectGeometry:
    bbox: BoundingBox
    image_width: int
    image_height: int


def categorize(op: EditOp) -> EditCategory:
    if isinstance(op, Move):
        return EditCategory.MOVE
    if isinstance(op, (ScaleBy, ScaleToWidth, ScaleToHeight)):
        return EditCategory.SCALE
    if isinstance(op, (FlipHorizontal, FlipVertical)):
        return EditCategory.FLIP
    if isinstance(op, Shear):
        return EditCategory.SHEAR
    if isinstance(op, Rotate):
        return EditCategory.ROTATE
    if isinstance(op, Sequence):
        return EditCategory.MIX
    raise InvalidEditOp(f"not an edit operation: {op!r}")


def op_to_dict(op: EditOp) -> Dict[str, Any]:
    if isinstance(op, Sequence):
        return {"kind": op.kind, "ops": [op_to_dict(sub) for sub in op.ops]}
    if isinstance(op, Move):
        return {"kind": op.kind, "dx": op.dx, "dy": op.dy}
    if isinstance(op, ScaleBy):
        return {"kind": op.kind, "sx": op.sx, "sy": op.sy}
    if isinstance(op, ScaleToWidth):
        return {"kind": op.kind, "w": op.w, "uniform": op.uniform}
    if isinstance(op, ScaleToHeight):
        return {"kind": op.kind, "h": op.h, "uniform": op.uniform}
    if isinstance(op, Rotate):
        return {"kind": op.kind, "degrees": op.degrees}
    if isinstance(op, Shear):
        return {"kind": op.kind, "kx": op.kx, "ky": op.ky}
    if isinstance(op, (FlipHorizontal, FlipVertical)):
        return {"kind": op.kind}
    raise InvalidEditOp(f"not an edit operation: {op!r}")


def op_from_dict(data: Dict[str, Any]) -> EditOp:
    try:
        kind = data["kind"]
        cls = OP_TYPES[kind]
    except (KeyError, TypeError) as e:
        raise InvalidEditOp(f"unknown edit operation payload: {data!r}") from e
    if cls is Sequence:
        return Sequence(tuple(op_from_dict(sub) for sub in data.get("ops", [])))
    params = {k: v for k, v in data.items() if k != "kind"}
    try:
        return cls(**params)
    except TypeError as e:
        raise InvalidEditOp(f"bad parameters for {kind}: {params!r}") from e
