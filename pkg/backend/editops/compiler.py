"""
Deterministic EditOp -> AffineTransform compiler.

Anchors: scale, rotate and shear act about the bbox center; flips mirror
across the bbox center lines; moves are absolute pixel offsets in screen
coordinates (y down, "left" is negative x). Sequence items see the geometry
produced by the items before them.
"""
from backend.editops.operations import (
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
)
from backend.exceptions import DegenerateScale, InvalidEditOp, ZeroSizeObject
from backend.geometry import SINGULAR_EPS, AffineTransform, about_anchor, compose

MIN_OBJECT_EXTENT = 1e-9


def _checked(t: AffineTransform, op: EditOp) -> AffineTransform:
    if abs(t.determinant) < SINGULAR_EPS:
        raise DegenerateScale(f"{op!r} collapses the object (det={t.determinant:.3e})")
    return t


def _extent(geom: ObjectGeometry, axis: str) -> float:
    size = geom.bbox.width if axis == "x" else geom.bbox.height
    if size < MIN_OBJECT_EXTENT:
        raise ZeroSizeObject(f"object has no {'width' if axis == 'x' else 'height'}: {geom.bbox.as_tuple()}")
    return size


def _compile_single(op: EditOp, geom: ObjectGeometry) -> AffineTransform:
    center = geom.bbox.center
    if isinstance(op, Move):
        return AffineTransform.translation(op.dx, op.dy)
    if isinstance(op, ScaleBy):
        return _checked(about_anchor(AffineTransform.scaling(op.sx, op.sy), center), op)
    if isinstance(op, ScaleToWidth):
        factor = op.w / _extent(geom, "x")
        linear = AffineTransform.scaling(factor, factor if op.uniform else 1.0)
        return _checked(about_anchor(linear, center), op)
    if isinstance(op, ScaleToHeight):
        factor = op.h / _extent(geom, "y")
        linear = AffineTransform.scaling(factor if op.uniform else 1.0, factor)
        return _checked(about_anchor(linear, center), op)
    if isinstance(op, Rotate):
        return about_anchor(AffineTransform.rotation(op.degrees), center)
    if isinstance(op, FlipHorizontal):
        return about_anchor(AffineTransform.scaling(-1.0, 1.0), center)
    if isinstance(op, FlipVertical):
        return about_anchor(AffineTransform.scaling(1.0, -1.0), center)
    if isinstance(op, Shear):
        return _checked(about_anchor(AffineTransform.shear(op.kx, op.ky), center), op)
    if isinstance(op, Sequence):
        total = AffineTransform.identity()
        current = geom
        for sub in op.ops:
            step = _compile_single(sub, current)
            total = compose(step, total)
            current = ObjectGeometry(step.map_box(current.bbox), geom.image_width, geom.image_height)
        return _checked(total, op)
    raise InvalidEditOp(f"not an edit operation: {op!r}")


def compile_op(op: EditOp, geom: ObjectGeometry) -> AffineTransform:
    """Transform in absolute image coordinates for `op` applied to the object in `geom`"""
    if not geom.bbox.within(geom.image_width, geom.image_height):
        raise ValueError(
            f"object bbox {geom.bbox.as_tuple()} lies outside the {geom.image_width}x{geom.image_height} image"
        )
    return _compile_single(op, geom)
