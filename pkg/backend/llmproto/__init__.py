"""
Prompt building and reply parsing for the grounding and reasoning models.
"""
from backend.llmproto.types import Detection, GroundingReply, ReasonerReply, SceneDescriptions
from backend.llmproto.prompts import (
    DEFAULT_TEMPLATE_VERSION,
    build_grounding_prompt,
    build_reasoner_prompt,
    format_box,
    template_hash,
)
from backend.llmproto.grounding import extract_json_object, parse_grounding_reply, render_grounding_reply
from backend.llmproto.reasoning import (
    ID_END,
    ID_START,
    MATRIX_END,
    MATRIX_START,
    SENTINELS,
    parse_reasoner_reply,
    render_reasoner_reply,
)

__all__ = [
    "DEFAULT_TEMPLATE_VERSION",
    "Detection",
    "GroundingReply",
    "ID_END",
    "ID_START",
    "MATRIX_END",
    "MATRIX_START",
    "ReasonerReply",
    "SENTINELS",
    "SceneDescriptions",
    "build_grounding_prompt",
    "build_reasoner_prompt",
    "extract_json_object",
    "format_box",
    "parse_grounding_reply",
    "parse_reasoner_reply",
    "render_grounding_reply",
    "render_reasoner_reply",
    "template_hash",
]
