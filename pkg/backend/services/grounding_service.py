from typing import List, Optional, Sequence, Tuple

import httpx
import numpy as np
from loguru import logger
from pydantic import ValidationError

from backend.config.settings import BackendConfig
from backend.exceptions import MalformedReply
from backend.geometry import BinaryMask, BoundingBox, Point, image_to_b64
from backend.llmproto import Detection, SceneDescriptions, build_grounding_prompt, parse_grounding_reply
from backend.schemas import GroundResponse
from backend.services.contracts import GroundTruthObject
from backend.services.model_client import ModelClient


def interior_point(mask: BinaryMask) -> Point:
    """Center of the mask pixel closest to the mask centroid"""
    rows, cols = np.nonzero(mask.bits)
    cy, cx = rows.mean(), cols.mean()
    i = int(np.argmin((rows - cy) ** 2 + (cols - cx) ** 2))
    return Point(float(cols[i]) + 0.5, float(rows[i]) + 0.5)


def oracle_scene(objects: Sequence[GroundTruthObject], instruction: str) -> SceneDescriptions:
    labels = ", ".join(o.class_label for o in objects) or "no annotated objects"
    return SceneDescriptions(
        scene=f"An image showing {labels}.",
        relationships="Objects are reported with their annotated boxes." if objects else "There are no objects.",
        background_prompt="The same scene with the edited object removed.",
        generation_prompt=instruction.strip() or "The edited image.",
    )


class HttpGrounder:
    """Service for visual grounding through a multimodal model server"""

    name = "http-grounder"

    def __init__(self, config: BackendConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        self.client = ModelClient(config, transport=transport, stage="grounder")
        self.last_warnings: List[str] = []

    async def ground(self, image: np.ndarray, instruction: str) -> Tuple[List[Detection], SceneDescriptions]:
        prompt = build_grounding_prompt(instruction, self.config.template_version)
        data = await self.client.post_json(
            "/ground",
            {"image_b64": image_to_b64(image), "prompt": prompt, "template_version": self.config.template_version},
        )
        try:
            reply = GroundResponse.model_validate(data)
        except ValidationError as e:
            raise MalformedReply("grounding server answer has no reply field") from e

        height, width = image.shape[:2]
        parsed = parse_grounding_reply(reply.reply, image_size=(width, height))
        self.last_warnings = parsed.warnings
        logger.debug(f"Grounder returned {len(parsed.detections)} detections ({len(parsed.warnings)} warnings)")
        return parsed.detections, parsed.scene


class OracleGrounder:
    """Reports the annotated objects of a sample exactly"""

    name = "oracle-grounder"

    def __init__(self, objects: Sequence[GroundTruthObject]):
        self.objects = list(objects)

    def _detection(self, obj: GroundTruthObject, box: BoundingBox) -> Detection:
        point = interior_point(obj.mask)
        point = Point(min(max(point.x, box.x_min), box.x_max), min(max(point.y, box.y_min), box.y_max))
        return Detection(bbox=box, point=point, class_label=obj.class_label, object_id=obj.object_id)

    def _box(self, obj: GroundTruthObject, width: int, height: int) -> BoundingBox:
        return obj.bbox

    async def ground(self, image: np.ndarray, instruction: str) -> Tuple[List[Detection], SceneDescriptions]:
        height, width = image.shape[:2]
        detections = []
        for obj in self.objects:
            box = self._box(obj, width, height)
            if box is not None:
                detections.append(self._detection(obj, box))
        return detections, oracle_scene(self.objects, instruction)


class JitterGrounder(OracleGrounder):
    """Oracle boxes with seeded uniform noise of up to `jitter` pixels per edge"""

    name = "jitter-grounder"

    def __init__(self, objects: Sequence[GroundTruthObject], jitter: float = 0.0, seed: int = 0):
        super().__init__(objects)
        if jitter < 0:
            raise ValueError(f"jitter must be non-negative, got {jitter}")
        self.jitter = float(jitter)
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def _box(self, obj: GroundTruthObject, width: int, height: int) -> Optional[BoundingBox]:
        box = obj.bbox
        if self.jitter == 0.0:
            return box
        noise = self._rng.uniform(-self.jitter, self.jitter, size=4)
        x0, y0, x1, y1 = (v + float(n) for v, n in zip(box.as_tuple(), noise))
        if x0 >= x1 or y0 >= y1:
            logger.debug(f"Jitter collapsed box of object {obj.object_id}; keeping the annotated box")
            return box
        return BoundingBox(x0, y0, x1, y1).clamp(width, height)
