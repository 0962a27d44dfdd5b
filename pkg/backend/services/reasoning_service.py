from typing import Optional, Sequence, Tuple

import httpx
from loguru import logger
from pydantic import ValidationError

from backend.config.settings import BackendConfig
from backend.editops import (
    EditOp,
    Move,
    ObjectGeometry,
    Rotate,
    ScaleBy,
    ScaleToHeight,
    ScaleToWidth,
    Sequence as SequenceOp,
    Shear,
    compile_op,
    label_key,
    parse_instruction,
    parse_target,
)
from backend.exceptions import MalformedReply, NoCandidateObjects, ReplyParseError, TargetNotFound
from backend.geometry import BoundingBox
from backend.llmproto import ReasonerReply, SceneDescriptions, build_reasoner_prompt, parse_reasoner_reply, render_reasoner_reply
from backend.schemas import ReasonResponse
from backend.services.contracts import Candidate
from backend.services.model_client import ModelClient


def select_candidate(instruction: str, boxes: Sequence[Candidate]) -> Tuple[int, BoundingBox]:
    """Candidate whose class label names the instruction's object; a lone candidate is taken as is"""
    noun = parse_target(instruction)
    if noun is not None:
        key = label_key(noun)
        for object_id, box, label in boxes:
            if label_key(label) == key:
                return object_id, box
    if len(boxes) == 1:
        return boxes[0][0], boxes[0][1]
    raise TargetNotFound(f"no candidate matches {noun!r} among {[label for _, _, label in boxes]}")


class HttpReasoner:
    """Service for edit-operation reasoning through a text LLM server"""

    name = "http-reasoner"

    def __init__(self, config: BackendConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        self.client = ModelClient(config, transport=transport, stage="reasoner")
        self.stats = {"attempts": 0, "parse_failures": 0}

    async def reason(self, instruction: str, scene: SceneDescriptions, boxes: Sequence[Candidate]) -> ReasonerReply:
        prompt = build_reasoner_prompt(instruction, scene, boxes, self.config.template_version)
        attempts = self.config.max_retries + 1
        last_error: Optional[ReplyParseError] = None
        for attempt in range(1, attempts + 1):
            self.stats["attempts"] += 1
            data = await self.client.post_json("/reason", {"prompt": prompt})
            try:
                text = ReasonResponse.model_validate(data).reply
                return parse_reasoner_reply(text)
            except ValidationError:
                last_error = MalformedReply("reasoning server answer has no reply field")
            except ReplyParseError as e:
                last_error = e
            self.stats["parse_failures"] += 1
            logger.warning(f"Reasoner reply attempt {attempt}/{attempts} rejected ({last_error.constraint}): {last_error}")
        raise last_error


class CompilerReasoner:
    """Exact reasoner: canonical grammar parse plus the deterministic compiler"""

    name = "compiler-reasoner"

    def __init__(self, image_size: Tuple[int, int]):
        self.image_width, self.image_height = image_size

    def adjust(self, op: EditOp) -> EditOp:
        return op

    async def reason(self, instruction: str, scene: SceneDescriptions, boxes: Sequence[Candidate]) -> ReasonerReply:
        boxes = list(boxes)
        if not boxes:
            raise NoCandidateObjects("reasoner needs at least one candidate object")
        op = self.adjust(parse_instruction(instruction))
        object_id, box = select_candidate(instruction, boxes)
        transform = compile_op(op, ObjectGeometry(box, self.image_width, self.image_height))
        return ReasonerReply(
            target_id=object_id,
            transform=transform,
            raw_text=render_reasoner_reply(transform, object_id),
        )


class NoisyReasoner(CompilerReasoner):
    """
    Compiler reasoner with a deterministic relative error.

    Magnitudes (displacements, log scale factors, target sizes, angles and
    shear factors) are shrunk by `relative_error`, so the absolute error grows
    with the size of the requested edit.
    """

    name = "noisy-reasoner"

    def __init__(self, image_size: Tuple[int, int], relative_error: float = 0.2):
        super().__init__(image_size)
        if not 0 <= relative_error < 1:
            raise ValueError(f"relative_error must be in [0, 1), got {relative_error}")
        self.relative_error = relative_error

    def adjust(self, op: EditOp) -> EditOp:
        k = 1.0 - self.relative_error
        if isinstance(op, Move):
            return Move(op.dx * k, op.dy * k)
        if isinstance(op, ScaleBy):
            return ScaleBy(op.sx ** k, op.sy ** k)
        if isinstance(op, ScaleToWidth):
            return ScaleToWidth(op.w * k, op.uniform)
        if isinstance(op, ScaleToHeight):
            return ScaleToHeight(op.h * k, op.uniform)
        if isinstance(op, Rotate):
            return Rotate(op.degrees * k)
        if isinstance(op, Shear):
            return Shear(op.kx * k, op.ky * k)
        if isinstance(op, SequenceOp):
            return SequenceOp(tuple(self.adjust(sub) for sub in op.ops))
        return op
