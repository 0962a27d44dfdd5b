from typing import Dict, Optional, Sequence

import httpx
import numpy as np
from loguru import logger
from pydantic import ValidationError

from backend.config.settings import BackendConfig
from backend.exceptions import BackendError, InvalidMaskFile, MalformedReply, ObjectNotFound
from backend.geometry import image_to_b64, mask_from_b64
from backend.llmproto import Detection
from backend.schemas import DetectionPayload, PromptModeEnum, RefineResponse
from backend.services.contracts import GroundTruthObject, RefinedObject
from backend.services.model_client import ModelClient


class HttpRefiner:
    """Service for turning detections into masks through a promptable segmentation server"""

    name = "http-refiner"

    def __init__(
        self,
        config: BackendConfig,
        prompt_mode: str = "class",
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.config = config
        self.prompt_mode = PromptModeEnum(prompt_mode)
        self.client = ModelClient(config, transport=transport, stage="refiner")

    async def refine(self, image: np.ndarray, detections: Sequence[Detection]) -> Dict[int, RefinedObject]:
        if not detections:
            return {}
        payload = {
            "image_b64": image_to_b64(image),
            "prompt_mode": self.prompt_mode.value,
            "detections": [
                DetectionPayload(
                    object_id=d.object_id,
                    class_label=d.class_label,
                    bbox=list(d.bbox.as_tuple()),
                    point=list(d.point.as_tuple()),
                ).model_dump()
                for d in detections
            ],
        }
        data = await self.client.post_json("/refine", payload)
        try:
            response = RefineResponse.model_validate(data)
        except ValidationError as e:
            raise MalformedReply("refinement server answer does not match the schema") from e

        height, width = image.shape[:2]
        requested = {d.object_id for d in detections}
        refined: Dict[int, RefinedObject] = {}
        for obj in response.objects:
            if obj.object_id not in requested:
                logger.warning(f"Refiner returned unrequested object id {obj.object_id}, ignored")
                continue
            try:
                mask = mask_from_b64(obj.mask_b64)
            except InvalidMaskFile as e:
                raise BackendError(f"refiner mask for object {obj.object_id} is invalid: {e}") from e
            if mask.shape != (height, width):
                raise BackendError(f"refiner mask for object {obj.object_id} is {mask.width}x{mask.height}, image is {width}x{height}")
            if mask.is_empty():
                logger.warning(f"Refiner returned an empty mask for object {obj.object_id}")
                continue
            refined[obj.object_id] = RefinedObject.from_mask(mask)
        return refined


class OracleRefiner:
    """Returns annotated masks; detections are matched by id, then by class label"""

    name = "oracle-refiner"

    def __init__(self, objects: Sequence[GroundTruthObject]):
        self.objects = list(objects)

    def _match(self, detection: Detection) -> Optional[GroundTruthObject]:
        for obj in self.objects:
            if obj.object_id == detection.object_id and obj.class_label == detection.class_label:
                return obj
        for obj in self.objects:
            if obj.class_label == detection.class_label:
                return obj
        return None

    async def refine(self, image: np.ndarray, detections: Sequence[Detection]) -> Dict[int, RefinedObject]:
        refined = {}
        for detection in detections:
            obj = self._match(detection)
            if obj is None:
                logger.debug(f"No annotation for detection {detection.object_id} ({detection.class_label})")
                continue
            refined[detection.object_id] = RefinedObject.from_mask(obj.mask)
        return refined


def require_object(refined: Dict[int, RefinedObject], object_id: int) -> RefinedObject:
    try:
        return refined[object_id]
    except KeyError:
        raise ObjectNotFound(object_id) from None
