"""
Exception hierarchy shared by every backend package.

Value-like failures also derive from ValueError so callers that only know
about the builtin still catch them.
"""
from typing import Optional, Tuple


class PoemError(Exception):
    """Base class for all toolkit errors"""


# Geometry

class SingularTransform(PoemError, ValueError):
    """Transform determinant is too close to zero to invert"""


class DimensionMismatch(PoemError, ValueError):
    """Two rasters that must share dimensions do not"""


class EmptyMask(PoemError, ValueError):
    """Operation needs at least one set pixel"""


class InvalidMaskFile(PoemError, ValueError):
    """Mask image holds values other than 0 and 255"""


# Edit operations

class InvalidEditOp(PoemError, ValueError):
    """EditOp violates its field invariants"""


class DegenerateScale(PoemError, ValueError):
    """Compiled transform would collapse the object"""


class ZeroSizeObject(PoemError, ValueError):
    """Object geometry has no extent along an axis"""


class UnparsableInstruction(PoemError, ValueError):
    """Instruction falls outside the canonical grammar"""

    def __init__(self, message: str, span: Optional[Tuple[int, int]] = None, text: str = ""):
        super().__init__(message)
        self.span = span
        self.text = text

    @property
    def offending(self) -> str:
        if self.span is None:
            return self.text
        return self.text[self.span[0]:self.span[1]]


# Protocol

class EmptyInstruction(PoemError, ValueError):
    """Prompt builder got an empty edit instruction"""


class NoCandidateObjects(PoemError, ValueError):
    """Reasoner prompt needs at least one candidate box"""


class ReplyParseError(PoemError, ValueError):
    """Structured model reply could not be parsed"""

    constraint = "reply"


class MalformedReply(ReplyParseError):
    constraint = "json"


class MissingDescriptions(ReplyParseError):
    constraint = "descriptions"


class MissingMatrixTokens(ReplyParseError):
    constraint = "matrix_tokens"


class MissingIdTokens(ReplyParseError):
    constraint = "id_tokens"


class WrongNumberCount(ReplyParseError):
    constraint = "number_count"


class BadBottomRow(ReplyParseError):
    constraint = "bottom_row"


class NonFiniteCoefficient(ReplyParseError):
    constraint = "finite"


# Backends

class BackendError(PoemError):
    """A stage backend failed"""


class BackendUnreachable(BackendError):
    """Model server could not be reached within the retry budget"""


class ObjectNotFound(BackendError):
    def __init__(self, object_id: int):
        super().__init__(f"object id {object_id} not found")
        self.object_id = object_id


class TargetNotFound(BackendError):
    """Reasoner picked an id that matches no detection and no class fallback applies"""


# Dataset / evaluation

class MalformedAnnotation(PoemError, ValueError):
    def __init__(self, path, reason: str = ""):
        super().__init__(f"malformed annotation {path}: {reason}" if reason else f"malformed annotation {path}")
        self.path = path


class MissingMask(PoemError, ValueError):
    def __init__(self, image: str):
        super().__init__(f"missing instance mask for image {image}")
        self.image = image


class ExhaustedResampling(PoemError, RuntimeError):
    def __init__(self, image: str, attempts: int):
        super().__init__(f"could not draw a non-empty transform for {image} after {attempts} attempts")
        self.image = image
        self.attempts = attempts


class UnknownSampleId(PoemError, KeyError):
    def __init__(self, sample_id: str):
        super().__init__(sample_id)
        self.sample_id = sample_id


class ConfigError(PoemError, ValueError):
    """Configuration file or override is invalid"""
