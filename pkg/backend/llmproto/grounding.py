"""
Parser for grounding model replies (JSON schema in protocol.md).
"""
import json
import math
from typing import List, Optional, Tuple

from loguru import logger
from pydantic import ValidationError

from backend.exceptions import MalformedReply, MissingDescriptions
from backend.geometry import BoundingBox, Point
from backend.llmproto.types import Detection, GroundingReply, SceneDescriptions
from backend.schemas import GroundingObject, GroundingReplyPayload

DESCRIPTION_FIELDS = ("scene", "relationships", "background_prompt", "generation_prompt")

_DECODER = json.JSONDecoder()


def extract_json_object(text: str) -> str:
    """The first '{' that starts a decodable JSON object, up to where that object ends"""
    start = text.find("{")
    while start >= 0:
        try:
            obj, end = _DECODER.raw_decode(text, start)
        except (ValueError, RecursionError):
            obj = None
        if isinstance(obj, dict):
            return text[start:end]
        start = text.find("{", start + 1)
    raise MalformedReply("reply holds no JSON object")


def _detection(obj: GroundingObject, image_size: Optional[Tuple[int, int]], warnings: List[str]) -> Optional[Detection]:
    values = list(obj.bbox) + list(obj.point)
    if not all(math.isfinite(v) for v in values):
        warnings.append(f"object {obj.object_id}: non-finite coordinates, dropped")
        return None
    x0, y0, x1, y1 = obj.bbox
    if image_size is not None:
        width, height = image_size
        clamped = (min(max(x0, 0), width), min(max(y0, 0), height), min(max(x1, 0), width), min(max(y1, 0), height))
        if clamped != (x0, y0, x1, y1):
            warnings.append(f"object {obj.object_id}: box {obj.bbox} clamped to the {width}x{height} image")
        x0, y0, x1, y1 = clamped
    if not (x0 < x1 and y0 < y1):
        warnings.append(f"object {obj.object_id}: empty box {[x0, y0, x1, y1]}, dropped")
        return None
    box = BoundingBox(x0, y0, x1, y1)
    px, py = obj.point
    cx, cy = min(max(px, x0), x1), min(max(py, y0), y1)
    if (cx, cy) != (px, py):
        warnings.append(f"object {obj.object_id}: point {obj.point} moved inside its box")
    return Detection(bbox=box, point=Point(cx, cy), class_label=obj.class_label.strip(), object_id=obj.object_id)


def parse_grounding_reply(text: str, image_size: Optional[Tuple[int, int]] = None) -> GroundingReply:
    """
    Parse a grounding reply into detections and the four scene descriptions.

    Colliding ids keep their first occurrence. With image_size=(w, h) boxes
    are clamped to the image and boxes left empty are dropped. Every repair is
    reported in GroundingReply.warnings.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    snippet = extract_json_object(text)
    try:
        payload = GroundingReplyPayload.model_validate_json(snippet)
    except ValidationError as e:
        raise MalformedReply(f"grounding reply does not match the schema: {e.error_count()} error(s)") from e

    missing = [name for name in DESCRIPTION_FIELDS if not (getattr(payload, name) or "").strip()]
    if missing:
        raise MissingDescriptions(f"grounding reply lacks descriptions: {', '.join(missing)}")

    warnings: List[str] = []
    detections: List[Detection] = []
    seen = set()
    for obj in payload.objects:
        if obj.object_id in seen:
            warnings.append(f"duplicate object id {obj.object_id}: kept the first occurrence")
            continue
        seen.add(obj.object_id)
        det = _detection(obj, image_size, warnings)
        if det is not None:
            detections.append(det)

    for w in warnings:
        logger.warning(f"Grounding reply: {w}")

    scene = SceneDescriptions(
        scene=payload.scene.strip(),
        relationships=payload.relationships.strip(),
        background_prompt=payload.background_prompt.strip(),
        generation_prompt=payload.generation_prompt.strip(),
    )
    return GroundingReply(detections=detections, scene=scene, warnings=warnings)


def render_grounding_reply(detections: List[Detection], scene: SceneDescriptions) -> str:
    """JSON text in the reply schema; used by the stub server and fixture writers"""
    payload = GroundingReplyPayload(
        objects=[
            GroundingObject(
                object_id=d.object_id,
                class_label=d.class_label,
                bbox=list(d.bbox.as_tuple()),
                point=list(d.point.as_tuple()),
            )
            for d in detections
        ],
        scene=scene.scene,
        relationships=scene.relationships,
        background_prompt=scene.background_prompt,
        generation_prompt=scene.generation_prompt,
    )
    return payload.model_dump_json(indent=2)
