"""
Front-end for the canonical instruction grammar (EBNF in protocol.md).

Only the template grammar is accepted. Anything else raises
UnparsableInstruction with the failing clause span so the sample can be
routed to an LLM reasoner instead.
"""
import re
from typing import List, Optional, Tuple

from backend.editops.operations import (
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
from backend.exceptions import InvalidEditOp, UnparsableInstruction

NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:e[+-]?\d+)?"
PX = r"\s?(?:px|pixels?)"
DEG = r"\s?(?:°|degrees?|deg)"
OBJ = r"(?P<obj>it|the [a-z][a-z0-9 \-]*?)"
DIRECTION = r"(?:to the )?(?:left|right|up|down)(?:wards?)?"
SENSE = r"clockwise|counterclockwise|counter-clockwise|anticlockwise|anti-clockwise"

_PIECE_NUM_FIRST = rf"(?:by )?(?P<n>{NUM}){PX} (?:to the )?(?P<dir>left|right|up|down)(?:wards?)?"
_PIECE_DIR_FIRST = rf"(?:to the )?(?P<dir>left|right|up|down)(?:wards?)? by (?P<n>{NUM}){PX}"
_PIECE = rf"(?:(?:by )?{NUM}{PX} {DIRECTION}|{DIRECTION} by {NUM}{PX})"

_FLIPS = {
    "horizontally": FlipHorizontal,
    "left to right": FlipHorizontal,
    "left-to-right": FlipHorizontal,
    "across its vertical axis": FlipHorizontal,
    "along its vertical axis": FlipHorizontal,
    "vertically": FlipVertical,
    "upside down": FlipVertical,
    "upside-down": FlipVertical,
    "top to bottom": FlipVertical,
    "across its horizontal axis": FlipVertical,
    "along its horizontal axis": FlipVertical,
}


def _rx(pattern: str) -> "re.Pattern":
    return re.compile(pattern)


_MOVE = _rx(rf"(?:move|shift) {OBJ} (?P<disp>(?:by )?{_PIECE}(?:, {_PIECE})*)")
_SCALE_UNIFORM = _rx(rf"(?:scale|resize) {OBJ} by (?:a factor of )?x?(?P<f>{NUM})")
_SCALE_TIMES = _rx(rf"(?:scale|resize) {OBJ} to (?P<f>{NUM}) times (?:its|the original) size")
_SCALE_PERCENT = _rx(rf"(?:scale|resize) {OBJ} (?:to |by )?(?P<pct>{NUM})\s?%")
_SCALE_BOTH_AXES = _rx(rf"(?:scale|resize) {OBJ} by (?P<sx>{NUM}) horizontally, (?P<sy>{NUM}) vertically")
_SCALE_AXIS_FIRST = _rx(rf"(?:scale|resize) {OBJ} (?P<axis>horizontally|vertically) by (?P<f>{NUM})")
_SCALE_AXIS_LAST = _rx(rf"(?:scale|resize) {OBJ} by (?P<f>{NUM}) (?P<axis>horizontally|vertically)")
_MAKE_SIZE = _rx(rf"make {OBJ} (?P<n>{NUM}){PX} (?P<dim>wide|tall)")
_RESIZE_TO_SIZE = _rx(rf"(?:scale|resize) {OBJ} to (?P<n>{NUM}){PX} (?P<dim>wide|tall)")
_RESIZE_TO_DIM = _rx(rf"(?:scale|resize) {OBJ} to a (?P<dim>width|height) of (?P<n>{NUM}){PX}")
_RESIZE_ONLY_AXIS = _rx(rf"(?:scale|resize) {OBJ} only (?P<axis>horizontally|vertically) to (?P<n>{NUM}){PX}")
_ROTATE_NUM_FIRST = _rx(rf"rotate {OBJ} (?:by )?(?P<deg>{NUM})(?:{DEG})?(?: (?P<sense>{SENSE}))?")
_ROTATE_SENSE_FIRST = _rx(rf"rotate {OBJ} (?P<sense>{SENSE}) by (?P<deg>{NUM})(?:{DEG})?")
_FLIP = _rx(rf"flip {OBJ} (?P<how>{'|'.join(re.escape(k) for k in _FLIPS)})")
_SHEAR_BOTH_AXES = _rx(rf"shear {OBJ} by (?P<kx>{NUM}) horizontally, (?P<ky>{NUM}) vertically")
_SHEAR_BOTH_NAMED = _rx(rf"shear {OBJ} horizontally by (?P<kx>{NUM}), vertically by (?P<ky>{NUM})")
_SHEAR_PAIR = _rx(rf"shear {OBJ} by \((?P<kx>{NUM}), (?P<ky>{NUM})\)")
_SHEAR_AXIS_FIRST = _rx(rf"shear {OBJ} (?P<axis>horizontally|vertically) by (?P<k>{NUM})")
_SHEAR_AXIS_LAST = _rx(rf"shear {OBJ} by (?P<k>{NUM}) (?P<axis>horizontally|vertically)")

_CONJUNCTION = re.compile(r" and ")


def normalize_instruction(text: str) -> str:
    """Lower-case, collapse whitespace, canonical comma spacing, no trailing period"""
    s = re.sub(r"\s+", " ", text.strip().lower())
    s = re.sub(r"\s*,\s*", ", ", s)
    s = re.sub(r"\(\s+", "(", s)
    s = re.sub(r"\s+\)", ")", s)
    return s.rstrip(" .!")


def _split_clauses(text: str) -> List[Tuple[int, int]]:
    spans = []
    start = 0
    for m in _CONJUNCTION.finditer(text):
        spans.append((start, m.start()))
        start = m.end()
    spans.append((start, len(text)))
    return spans


def _move(m: "re.Match") -> Move:
    disp = m.group("disp")
    if disp.startswith("by "):
        disp = disp[3:]
    dx = dy = 0.0
    for piece in disp.split(", "):
        pm = re.fullmatch(_PIECE_NUM_FIRST, piece) or re.fullmatch(_PIECE_DIR_FIRST, piece)
        if pm is None:
            raise ValueError(piece)
        n = float(pm.group("n"))
        direction = pm.group("dir")
        if direction == "left":
            dx -= n
        elif direction == "right":
            dx += n
        elif direction == "up":
            dy -= n
        else:
            dy += n
    return Move(dx + 0.0, dy + 0.0)


def _axis_scale(axis: str, factor: float) -> ScaleBy:
    return ScaleBy(factor, 1.0) if axis == "horizontally" else ScaleBy(1.0, factor)


def _axis_shear(axis: str, k: float) -> Shear:
    return Shear(k, 0.0) if axis == "horizontally" else Shear(0.0, k)


def _target_size(dim: str, n: float, uniform: bool = True) -> EditOp:
    if dim in ("wide", "width", "horizontally"):
        return ScaleToWidth(n, uniform)
    return ScaleToHeight(n, uniform)


def _rotation(m: "re.Match") -> Rotate:
    deg = float(m.group("deg"))
    if m.group("sense") == "clockwise":
        deg = -deg
    return Rotate(deg + 0.0)


# (pattern, builder) pairs tried in order; first full match wins
_RULES = (
    (_MOVE, _move),
    (_SCALE_BOTH_AXES, lambda m: ScaleBy(float(m.group("sx")), float(m.group("sy")))),
    (_SCALE_AXIS_FIRST, lambda m: _axis_scale(m.group("axis"), float(m.group("f")))),
    (_SCALE_AXIS_LAST, lambda m: _axis_scale(m.group("axis"), float(m.group("f")))),
    (_SCALE_PERCENT, lambda m: ScaleBy(float(m.group("pct")) / 100.0, float(m.group("pct")) / 100.0)),
    (_SCALE_UNIFORM, lambda m: ScaleBy(float(m.group("f")), float(m.group("f")))),
    (_SCALE_TIMES, lambda m: ScaleBy(float(m.group("f")), float(m.group("f")))),
    (_RESIZE_ONLY_AXIS, lambda m: _target_size(m.group("axis"), float(m.group("n")), uniform=False)),
    (_MAKE_SIZE, lambda m: _target_size(m.group("dim"), float(m.group("n")))),
    (_RESIZE_TO_SIZE, lambda m: _target_size(m.group("dim"), float(m.group("n")))),
    (_RESIZE_TO_DIM, lambda m: _target_size(m.group("dim"), float(m.group("n")))),
    (_ROTATE_SENSE_FIRST, _rotation),
    (_ROTATE_NUM_FIRST, _rotation),
    (_FLIP, lambda m: _FLIPS[m.group("how")]()),
    (_SHEAR_BOTH_AXES, lambda m: Shear(float(m.group("kx")), float(m.group("ky")))),
    (_SHEAR_BOTH_NAMED, lambda m: Shear(float(m.group("kx")), float(m.group("ky")))),
    (_SHEAR_PAIR, lambda m: Shear(float(m.group("kx")), float(m.group("ky")))),
    (_SHEAR_AXIS_FIRST, lambda m: _axis_shear(m.group("axis"), float(m.group("k")))),
    (_SHEAR_AXIS_LAST, lambda m: _axis_shear(m.group("axis"), float(m.group("k")))),
)


def _match_clause(clause: str):
    for pattern, builder in _RULES:
        m = pattern.fullmatch(clause)
        if m is None:
            continue
        try:
            return builder(m), m.group("obj")
        except (ValueError, InvalidEditOp):
            return None, None
    return None, None


def _parse(text: str):
    normalized = normalize_instruction(text)
    if not normalized:
        raise UnparsableInstruction("empty instruction", (0, 0), normalized)
    ops = []
    objects = []
    for start, end in _split_clauses(normalized):
        op, obj = _match_clause(normalized[start:end])
        if op is None:
            raise UnparsableInstruction(
                f"clause outside the instruction grammar: {normalized[start:end]!r}", (start, end), normalized
            )
        ops.append(op)
        objects.append(obj)
    return ops, objects


def parse_instruction(text: str) -> EditOp:
    ops, _ = _parse(text)
    if len(ops) == 1:
        return ops[0]
    return Sequence(tuple(ops))


def parse_target(text: str) -> Optional[str]:
    """Object noun phrase of the first clause ("the potted plant" -> "potted plant")"""
    normalized = normalize_instruction(text)
    if not normalized:
        return None
    start, end = _split_clauses(normalized)[0]
    _, obj = _match_clause(normalized[start:end])
    if obj is None or obj == "it":
        return None
    return obj[len("the "):]


def label_key(label: str) -> str:
    """'Potted plant', 'pottedplant' and 'potted-plant' share one key"""
    return re.sub(r"[^a-z0-9]", "", label.lower())


def label_mentioned(label: str, text: str) -> bool:
    """Whether `label` occurs in `text` as a run of up to three whole words"""
    key = label_key(label)
    if not key:
        return False
    words = re.findall(r"[a-z0-9]+", text.lower())
    for n in (1, 2, 3):
        for i in range(len(words) - n + 1):
            if "".join(words[i:i + n]) == key:
                return True
    return False
