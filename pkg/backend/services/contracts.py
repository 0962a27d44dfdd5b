"""
Stage contracts shared by HTTP, oracle and mock backends.

Every stage method is a coroutine so HTTP and in-process implementations
are interchangeable inside the pipeline agent.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np

from backend.geometry import AffineTransform, BinaryMask, BoundingBox, bbox_of_mask
from backend.llmproto import Detection, ReasonerReply, SceneDescriptions

Candidate = Tuple[int, BoundingBox, str]


@dataclass(frozen=True)
class RefinedObject:
    mask: BinaryMask
    bbox: BoundingBox

    @classmethod
    def from_mask(cls, mask: BinaryMask) -> "RefinedObject":
        return cls(mask=mask, bbox=bbox_of_mask(mask))


@dataclass(frozen=True)
class GroundTruthObject:
    """Annotated object handed to oracle backends"""

    object_id: int
    class_label: str
    mask: BinaryMask

    @property
    def bbox(self) -> BoundingBox:
        return bbox_of_mask(self.mask)


@dataclass(frozen=True)
class EditedImage:
    pixels: np.ndarray
    provenance: str
    # Region the drawer placed the object in, when the drawer knows it
    object_mask: Optional[BinaryMask] = None

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@runtime_checkable
class Grounder(Protocol):
    name: str

    async def ground(self, image: np.ndarray, instruction: str) -> Tuple[List[Detection], SceneDescriptions]:
        ...


@runtime_checkable
class Refiner(Protocol):
    name: str

    async def refine(self, image: np.ndarray, detections: Sequence[Detection]) -> Dict[int, RefinedObject]:
        ...


@runtime_checkable
class Reasoner(Protocol):
    name: str

    async def reason(self, instruction: str, scene: SceneDescriptions, boxes: Sequence[Candidate]) -> ReasonerReply:
        ...


@runtime_checkable
class Drawer(Protocol):
    name: str

    async def draw(
        self,
        image: np.ndarray,
        before: BinaryMask,
        after: BinaryMask,
        background_prompt: str,
        generation_prompt: str,
        transform: Optional[AffineTransform] = None,
    ) -> EditedImage:
        ...


@runtime_checkable
class FinalDetector(Protocol):
    """Extracts the edited object's mask from a drawn image"""

    name: str

    async def detect(self, edited: EditedImage, class_label: str) -> Optional[BinaryMask]:
        ...
