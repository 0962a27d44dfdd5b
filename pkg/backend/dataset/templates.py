"""
Instruction template bank.

Every form renders text inside the canonical grammar, so
parse_instruction(render_template(op, name, j)) == op for all ops and forms.
"""
from typing import List

from backend.editops import (
    EditOp,
    FlipHorizontal,
    FlipVertical,
    Move,
    Rotate,
    ScaleBy,
    ScaleToHeight,
    ScaleToWidth,
    Sequence,
    Shear,
)
from backend.exceptions import InvalidEditOp

FORMS_PER_KIND = 3

# Multi-word VOC labels; label_key(display_name(c)) == label_key(c) for every class
DISPLAY_NAMES = {
    "diningtable": "dining table",
    "pottedplant": "potted plant",
    "tvmonitor": "tv monitor",
}


def display_name(class_label: str) -> str:
    return DISPLAY_NAMES.get(class_label, class_label).lower()


def fmt(value: float) -> str:
    """Shortest text that parses back to exactly `value`"""
    value = float(value) + 0.0
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _move(op: Move, obj: str, form: int) -> str:
    pieces = []
    for amount, neg, pos in ((op.dx, "left", "right"), (op.dy, "up", "down")):
        if amount != 0 or (not pieces and op.dy == 0):
            direction = neg if amount < 0 else pos
            n = fmt(abs(amount))
            if form == 0:
                pieces.append(f"{direction} by {n}px")
            elif form == 1:
                pieces.append(f"{n} pixels to the {direction}")
            else:
                pieces.append(f"{n}px {direction}")
    verb = "shift" if form == 1 else "move"
    prefix = "by " if form == 1 else ""
    return f"{verb} {obj} {prefix}{', '.join(pieces)}"


def _scale_by(op: ScaleBy, obj: str, form: int) -> str:
    sx, sy = fmt(op.sx), fmt(op.sy)
    if op.sx == op.sy:
        return (
            f"scale {obj} by {sx}",
            f"resize {obj} by a factor of {sx}",
            f"resize {obj} to {sx} times its size",
        )[form]
    if op.sy == 1:
        return (
            f"scale {obj} horizontally by {sx}",
            f"resize {obj} by {sx} horizontally",
            f"scale {obj} by {sx} horizontally, 1 vertically",
        )[form]
    if op.sx == 1:
        return (
            f"scale {obj} vertically by {sy}",
            f"resize {obj} by {sy} vertically",
            f"scale {obj} by 1 horizontally, {sy} vertically",
        )[form]
    verb = "resize" if form == 1 else "scale"
    return f"{verb} {obj} by {sx} horizontally, {sy} vertically"


def _scale_to(size: float, uniform: bool, obj: str, form: int, wide: bool) -> str:
    n = fmt(size)
    if not uniform:
        axis = "horizontally" if wide else "vertically"
        return (
            f"scale {obj} only {axis} to {n}px",
            f"resize {obj} only {axis} to {n} pixels",
            f"scale {obj} only {axis} to {n} px",
        )[form]
    adjective, noun = ("wide", "width") if wide else ("tall", "height")
    return (
        f"make {obj} {n}px {adjective}",
        f"resize {obj} to {n} pixels {adjective}",
        f"scale {obj} to a {noun} of {n} pixels",
    )[form]


def _rotate(op: Rotate, obj: str, form: int) -> str:
    sense = "clockwise" if op.degrees < 0 else "counterclockwise"
    magnitude = fmt(abs(op.degrees))
    return (
        f"rotate {obj} by {magnitude} degrees {sense}",
        f"rotate {obj} {sense} by {magnitude} degrees",
        f"rotate {obj} {fmt(op.degrees)}°",
    )[form]


def _flip(op: EditOp, obj: str, form: int) -> str:
    if isinstance(op, FlipHorizontal):
        how = ("horizontally", "left to right", "across its vertical axis")[form]
    else:
        how = ("vertically", "upside down", "across its horizontal axis")[form]
    return f"flip {obj} {how}"


def _shear(op: Shear, obj: str, form: int) -> str:
    kx, ky = fmt(op.kx), fmt(op.ky)
    if op.ky == 0 and op.kx != 0:
        return (
            f"shear {obj} horizontally by {kx}",
            f"shear {obj} by {kx} horizontally",
            f"shear {obj} by ({kx}, 0)",
        )[form]
    if op.kx == 0 and op.ky != 0:
        return (
            f"shear {obj} vertically by {ky}",
            f"shear {obj} by {ky} vertically",
            f"shear {obj} by (0, {ky})",
        )[form]
    return (
        f"shear {obj} by {kx} horizontally, {ky} vertically",
        f"shear {obj} horizontally by {kx}, vertically by {ky}",
        f"shear {obj} by ({kx}, {ky})",
    )[form]


def _clause(op: EditOp, obj: str, form: int) -> str:
    if isinstance(op, Move):
        return _move(op, obj, form)
    if isinstance(op, ScaleBy):
        return _scale_by(op, obj, form)
    if isinstance(op, ScaleToWidth):
        return _scale_to(op.w, op.uniform, obj, form, wide=True)
    if isinstance(op, ScaleToHeight):
        return _scale_to(op.h, op.uniform, obj, form, wide=False)
    if isinstance(op, Rotate):
        return _rotate(op, obj, form)
    if isinstance(op, (FlipHorizontal, FlipVertical)):
        return _flip(op, obj, form)
    if isinstance(op, Shear):
        return _shear(op, obj, form)
    raise InvalidEditOp(f"no template for {op!r}")


def render_template(op: EditOp, class_label: str, form: int = 0) -> str:
    """Instruction text for `op` applied to the object of `class_label`, using surface form `form`"""
    form = form % FORMS_PER_KIND
    obj = f"the {display_name(class_label)}"
    if isinstance(op, Sequence):
        clauses = [_clause(sub, obj if i == 0 else "it", form) for i, sub in enumerate(op.ops)]
        text = " and ".join(clauses)
    else:
        text = _clause(op, obj, form)
    return text[0].upper() + text[1:]


def paraphrases(op: EditOp, class_label: str, count: int) -> List[str]:
    return [render_template(op, class_label, j) for j in range(count)]
