"""
Typed edit operations, their compiler to affine transforms, and the
canonical instruction grammar front-end.
"""
from backend.editops.operations import (
    CATEGORY_ORDER,
    OP_TYPES,
    EditCategory,
    EditOp,
    FlipHorizontal,
    FlipVertical,
    Move,
    ObjectGeometry,
    Rotate,
    ScaleBy,
    ScaleToHeight,
    ScaleToWidth,
    Sequence,
    Shear,
    categorize,
    op_from_dict,
    op_to_dict,
)
from backend.editops.compiler import compile_op
from backend.editops.parser import (
    label_key,
    label_mentioned,
    normalize_instruction,
    parse_instruction,
    parse_target,
)

__all__ = [
    "CATEGORY_ORDER",
    "OP_TYPES",
    "EditCategory",
    "EditOp",
    "FlipHorizontal",
    "FlipVertical",
    "Move",
    "ObjectGeometry",
    "Rotate",
    "ScaleBy",
    "ScaleToHeight",
    "ScaleToWidth",
    "Sequence",
    "Shear",
    "categorize",
    "compile_op",
    "label_key",
    "label_mentioned",
    "normalize_instruction",
    "op_from_dict",
    "op_to_dict",
    "parse_instruction",
    "parse_target",
]
