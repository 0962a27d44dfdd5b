"""
Values exchanged with the grounding and reasoning models.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

from backend.geometry import AffineTransform, BoundingBox, Point


@dataclass(frozen=True)
class Detection:
    bbox: BoundingBox
    point: Point
    class_label: str
    object_id: int

    def __post_init__(self):
        if not self.bbox.contains(self.point):
            raise ValueError(f"detection point {self.point.as_tuple()} lies outside its box {self.bbox.as_tuple()}")


@dataclass(frozen=True)
class SceneDescriptions:
    scene: str
    relationships: str
    background_prompt: str
    generation_prompt: str

    @classmethod
    def empty(cls) -> "SceneDescriptions":
        return cls("", "", "", "")


@dataclass(frozen=True)
class GroundingReply:
    detections: List[Detection]
    scene: SceneDescriptions
    warnings: List[str] = field(default_factory=list)

    def as_tuple(self) -> Tuple[List[Detection], SceneDescriptions]:
        return self.detections, self.scene


@dataclass(frozen=True)
class ReasonerReply:
    target_id: int
    transform: AffineTransform
    raw_text: str = ""
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.target_id < 0:
            raise ValueError(f"target id must be non-negative, got {self.target_id}")
