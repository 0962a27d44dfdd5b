"""
Parser for reasoning model replies.

The model wraps the 3x3 (or 2x3) matrix between <MSTART> and <MEND> and the
target object id between <ISTART> and <IEND>. Everything outside those
tokens is ignored. Failures raise a ReplyParseError subclass whose
`constraint` names the rule that broke, so callers can decide to retry.
"""
import math
import re
from typing import List, Union

from loguru import logger

from backend.exceptions import (
    BadBottomRow,
    MissingIdTokens,
    MissingMatrixTokens,
    NonFiniteCoefficient,
    WrongNumberCount,
)
from backend.geometry import AffineTransform
from backend.llmproto.types import ReasonerReply

MATRIX_START = "<MSTART>"
MATRIX_END = "<MEND>"
ID_START = "<ISTART>"
ID_END = "<IEND>"
SENTINELS = (MATRIX_START, MATRIX_END, ID_START, ID_END)

BOTTOM_ROW_TOL = 1e-6
MAX_ID_DIGITS = 18

_NUMBER = re.compile(r"[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?", re.ASCII)
_OBJECT_ID = re.compile(r"\s*\+?([0-9]+)\s*", re.ASCII)


def _matrix_block(text: str, warnings: List[str]) -> str:
    start = text.find(MATRIX_START)
    if start < 0:
        raise MissingMatrixTokens(f"reply has no {MATRIX_START} token")
    body_start = start + len(MATRIX_START)
    end = text.find(MATRIX_END, body_start)
    if end < 0:
        raise MissingMatrixTokens(f"{MATRIX_START} is never closed by {MATRIX_END}")
    extra = text.count(MATRIX_START, end)
    if extra:
        warnings.append(f"{extra} further matrix block(s) ignored, first block used")
    return text[body_start:end]


def _coefficients(block: str) -> List[float]:
    numbers = [float(tok) for tok in _NUMBER.findall(block)]
    if len(numbers) not in (6, 9):
        raise WrongNumberCount(f"matrix block holds {len(numbers)} numbers, expected 6 or 9")
    if not all(math.isfinite(v) for v in numbers):
        raise NonFiniteCoefficient("matrix block holds a non-finite coefficient")
    if len(numbers) == 9:
        bottom = numbers[6:]
        if any(abs(a - b) > BOTTOM_ROW_TOL for a, b in zip(bottom, (0.0, 0.0, 1.0))):
            raise BadBottomRow(f"bottom row must be (0, 0, 1), got {tuple(bottom)}")
        numbers = numbers[:6]
    return numbers


def _object_id(text: str) -> int:
    start = text.find(ID_START)
    if start < 0:
        raise MissingIdTokens(f"reply has no {ID_START} token")
    body_start = start + len(ID_START)
    end = text.find(ID_END, body_start)
    if end < 0:
        raise MissingIdTokens(f"{ID_START} is never closed by {ID_END}")
    m = _OBJECT_ID.fullmatch(text[body_start:end])
    if m is None or len(m.group(1)) > MAX_ID_DIGITS:
        raise MissingIdTokens(f"id block {text[body_start:end][:40]!r} is not a non-negative integer")
    return int(m.group(1))


def parse_reasoner_reply(text: Union[str, bytes]) -> ReasonerReply:
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    warnings: List[str] = []
    coefficients = _coefficients(_matrix_block(text, warnings))
    object_id = _object_id(text)
    for w in warnings:
        logger.warning(f"Reasoner reply: {w}")
    return ReasonerReply(
        target_id=object_id,
        transform=AffineTransform.from_coefficients(coefficients),
        raw_text=text,
        warnings=warnings,
    )


def _num(value: float) -> str:
    return repr(float(value))


def render_reasoner_reply(transform: AffineTransform, object_id: int, prose: str = "", style: str = "nested") -> str:
    """
    Reply text in the sentinel format; `prose` is placed before the tokens.

    style "nested" writes [[..], [..], [0, 0, 1]], "flat" writes nine
    space-separated numbers and "affine" writes only the six free ones.
    """
    c = transform.coefficients()
    if style == "nested":
        matrix = f"[[{_num(c[0])}, {_num(c[1])}, {_num(c[2])}], [{_num(c[3])}, {_num(c[4])}, {_num(c[5])}], [0, 0, 1]]"
    elif style == "flat":
        matrix = " ".join(_num(v) for v in c) + " 0 0 1"
    elif style == "affine":
        matrix = "\n".join(" ".join(_num(v) for v in row) for row in (c[:3], c[3:]))
    else:
        raise ValueError(f"unknown reply style {style!r}")
    return f"{prose}{MATRIX_START}{matrix}{MATRIX_END} {ID_START}{int(object_id)}{ID_END}"
