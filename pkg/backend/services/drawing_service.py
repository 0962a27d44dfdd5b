from typing import Optional

import httpx
import numpy as np
from loguru import logger
from pydantic import ValidationError

from backend.compositor import composite, inpaint_mean
from backend.config.settings import BackendConfig
from backend.exceptions import BackendError, DimensionMismatch, MalformedReply
from backend.geometry import (
    AffineTransform,
    BinaryMask,
    BoundingBox,
    Point,
    about_anchor,
    bbox_of_mask,
    compose,
    image_from_b64,
    image_to_b64,
    mask_from_b64,
    mask_to_b64,
)
from backend.llmproto import Detection
from backend.schemas import DrawResponse
from backend.services.contracts import EditedImage, Refiner
from backend.services.model_client import ModelClient


def _check_dims(image: np.ndarray, *masks: BinaryMask):
    for m in masks:
        if m.shape != image.shape[:2]:
            raise DimensionMismatch(f"mask {m.width}x{m.height} does not match image {image.shape[1]}x{image.shape[0]}")


def box_fit_transform(before: BinaryMask, after: BinaryMask) -> AffineTransform:
    """Axis-aligned scale and shift that carries the box of `before` onto the box of `after`"""
    src, dst = bbox_of_mask(before), bbox_of_mask(after)
    scale = AffineTransform.scaling(dst.width / src.width, dst.height / src.height)
    shift = AffineTransform.translation(dst.center.x - src.center.x, dst.center.y - src.center.y)
    return compose(shift, about_anchor(scale, src.center))


class HttpDrawer:
    """Service for edit-guided image generation through a diffusion server"""

    name = "http-drawer"

    def __init__(self, config: BackendConfig, refine: bool = False, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        self.refine = refine
        self.client = ModelClient(config, transport=transport, stage="drawer")

    async def draw(
        self,
        image: np.ndarray,
        before: BinaryMask,
        after: BinaryMask,
        background_prompt: str,
        generation_prompt: str,
        transform: Optional[AffineTransform] = None,
    ) -> EditedImage:
        _check_dims(image, before, after)
        payload = {
            "image_b64": image_to_b64(image),
            "before_mask_b64": mask_to_b64(before),
            "after_mask_b64": mask_to_b64(after),
            "background_prompt": background_prompt,
            "generation_prompt": generation_prompt,
            "transform": list(transform.coefficients()) if transform is not None else None,
            "refine": self.refine,
        }
        data = await self.client.post_json("/draw", payload)
        try:
            response = DrawResponse.model_validate(data)
            pixels = image_from_b64(response.image_b64)
        except ValidationError as e:
            raise MalformedReply("drawing server answer does not match the schema") from e
        except Exception as e:
            raise BackendError(f"drawing server returned an unreadable image: {e}") from e
        if pixels.shape[:2] != image.shape[:2]:
            raise BackendError(
                f"drawn image is {pixels.shape[1]}x{pixels.shape[0]}, input was {image.shape[1]}x{image.shape[0]}"
            )
        object_mask = mask_from_b64(response.mask_b64) if response.mask_b64 else None
        return EditedImage(pixels=pixels, provenance=f"{self.name}@{self.config.endpoint_url}", object_mask=object_mask)


class ReferenceDrawer:
    """Pixel-space reference drawer backed by the compositor"""

    name = "reference-drawer"

    def __init__(self, filler: str = "inpaint", seed: int = 0):
        self.filler = filler
        self.seed = seed

    async def draw(
        self,
        image: np.ndarray,
        before: BinaryMask,
        after: BinaryMask,
        background_prompt: str,
        generation_prompt: str,
        transform: Optional[AffineTransform] = None,
    ) -> EditedImage:
        _check_dims(image, before, after)
        provenance = f"{self.name}/{self.filler}/seed={self.seed}"
        if before.is_empty():
            return EditedImage(pixels=np.array(image, copy=True), provenance=provenance, object_mask=after)
        if transform is None:
            if after.is_empty():
                # Object removal: only the vacated region changes
                known = ~(before.bits | after.bits)
                pixels = inpaint_mean(np.asarray(image), before.bits, known)
                return EditedImage(pixels=pixels, provenance=provenance, object_mask=after)
            transform = box_fit_transform(before, after)
            logger.debug(f"Drawer fitted transform {transform.coefficients()} from mask boxes")
        edited = composite(image, before, transform, seed=self.seed, filler=self.filler)
        return EditedImage(pixels=edited.pixels, provenance=provenance, object_mask=edited.object_mask)


class DrawnMaskDetector:
    """Final-stage oracle: the region the drawer reports for the object"""

    name = "drawn-mask-detector"

    async def detect(self, edited: EditedImage, class_label: str) -> Optional[BinaryMask]:
        return edited.object_mask


class RefinerDetector:
    """Final-stage detector that prompts a refiner with a full-image box of the target class"""

    name = "refiner-detector"

    def __init__(self, refiner: Refiner):
        self.refiner = refiner

    async def detect(self, edited: EditedImage, class_label: str) -> Optional[BinaryMask]:
        box = BoundingBox.full_image(edited.width, edited.height)
        detection = Detection(bbox=box, point=Point(box.center.x, box.center.y), class_label=class_label, object_id=0)
        refined = await self.refiner.refine(edited.pixels, [detection])
        found = refined.get(0)
        return found.mask if found is not None else None
