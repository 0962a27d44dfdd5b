"""
Benchmark records: annotated source instances and generated edit samples.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from backend.editops import EditCategory, EditOp, categorize, parse_instruction
from backend.exceptions import UnparsableInstruction
from backend.geometry import AffineTransform, BinaryMask, BoundingBox, bbox_of_mask, warp_mask
from backend.schemas import DifficultyEnum as Difficulty


@dataclass(frozen=True)
class SourceInstance:
    image_ref: str
    image_path: Path
    class_label: str
    gt_mask: BinaryMask
    gt_bbox: BoundingBox
    image_width: int
    image_height: int
    instance_id: int = 1
    truncated: bool = False

    def __post_init__(self):
        if self.gt_mask.shape != (self.image_height, self.image_width):
            raise ValueError(
                f"{self.image_ref}#{self.instance_id}: mask is {self.gt_mask.width}x{self.gt_mask.height}, "
                f"image is {self.image_width}x{self.image_height}"
            )
        if self.gt_bbox != bbox_of_mask(self.gt_mask):
            raise ValueError(f"{self.image_ref}#{self.instance_id}: bbox does not match its mask")

    @property
    def key(self) -> str:
        return f"{self.image_ref}_{self.instance_id}"

    @property
    def area_fraction(self) -> float:
        return self.gt_mask.area / float(self.image_width * self.image_height)


@dataclass(frozen=True)
class EditSample:
    sample_id: str
    instance: SourceInstance
    instruction_text: str
    # None only for externally authored Reason samples
    canonical_op: Optional[EditOp]
    gt_transform: AffineTransform
    gt_mask_after: BinaryMask
    category: EditCategory
    difficulty: Difficulty
    seed: int
    # The other annotated objects of the same image, in instance_id order
    other_objects: Tuple[SourceInstance, ...] = ()

    def violations(self) -> List[str]:
        """Broken record invariants, empty when the sample is consistent"""
        problems = []
        for other in self.other_objects:
            if other.image_ref != self.instance.image_ref or other.instance_id == self.instance.instance_id:
                problems.append(f"other object {other.key} is not a distinct object of {self.instance.image_ref}")
        if warp_mask(self.instance.gt_mask, self.gt_transform) != self.gt_mask_after:
            problems.append("gt_mask_after differs from the warped instance mask")
        if self.gt_mask_after.is_empty():
            problems.append("gt_mask_after is empty")
        if self.canonical_op is None:
            if self.category != EditCategory.REASON:
                problems.append("only Reason samples may omit canonical_op")
            return problems
        try:
            if parse_instruction(self.instruction_text) != self.canonical_op:
                problems.append("instruction does not parse to canonical_op")
        except UnparsableInstruction as e:
            problems.append(f"instruction is outside the grammar: {e}")
        if categorize(self.canonical_op) != self.category:
            problems.append("category does not match canonical_op")
        return problems


def bucket_difficulty(iou_before_after: float, t_easy: float = 0.5, t_hard: float = 0.1) -> Difficulty:
    if not 0.0 <= iou_before_after <= 1.0:
        raise ValueError(f"IoU must be in [0, 1], got {iou_before_after}")
    if iou_before_after >= t_easy:
        return Difficulty.EASY
    if iou_before_after <= t_hard:
        return Difficulty.HARD
    return Difficulty.MEDIUM
