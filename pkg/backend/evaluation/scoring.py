"""
Per-sample stage scores. Every stage is scored against the target object only.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from loguru import logger

from backend.editops import label_key
from backend.exceptions import PoemError
from backend.geometry import AffineTransform, BinaryMask, BoundingBox, bbox_iou, mask_iou, warp_mask
from backend.llmproto import Detection
from backend.schemas import StageEnum as Stage
from backend.services.contracts import EditedImage, FinalDetector


@dataclass(frozen=True)
class StageResult:
    sample_id: str
    stage: Stage
    iou: Optional[float] = None
    fallback_used: bool = False
    error: Optional[str] = None

    def __post_init__(self):
        if (self.iou is None) == (self.error is None):
            raise ValueError(f"{self.sample_id}/{self.stage.value}: exactly one of iou and error must be set")
        if self.iou is not None and not 0.0 <= self.iou <= 1.0:
            raise ValueError(f"{self.sample_id}/{self.stage.value}: iou {self.iou} outside [0, 1]")
        if self.fallback_used and self.stage is not Stage.GROUNDING:
            raise ValueError("fallback_used only applies to the grounding stage")

    @property
    def ok(self) -> bool:
        return self.error is None


def failed(sample_id: str, stage: Stage, error) -> StageResult:
    message = str(error) or type(error).__name__
    if isinstance(error, BaseException):
        message = f"{type(error).__name__}: {message}"
    return StageResult(sample_id=sample_id, stage=stage, error=message)


def select_target_detection(
    detections: Sequence[Detection], class_label: str, gt_bbox: BoundingBox
) -> Optional[Detection]:
    """Same-class detection overlapping the GT box most; first one wins ties"""
    key = label_key(class_label)
    best, best_iou = None, -1.0
    for det in detections:
        if label_key(det.class_label) != key:
            continue
        iou = bbox_iou(det.bbox, gt_bbox)
        if iou > best_iou:
            best, best_iou = det, iou
    return best


def score_grounding(
    predicted: Optional[BoundingBox],
    gt: BoundingBox,
    image_dims: Tuple[int, int],
    sample_id: str = "",
) -> StageResult:
    fallback = predicted is None
    if fallback:
        predicted = BoundingBox.full_image(*image_dims)
        logger.debug(f"{sample_id}: no target detection, scoring the full-image box")
    return StageResult(sample_id, Stage.GROUNDING, iou=bbox_iou(predicted, gt), fallback_used=fallback)


def score_refinement(predicted: Optional[BinaryMask], gt: BinaryMask, sample_id: str = "") -> StageResult:
    if predicted is None:
        return StageResult(sample_id, Stage.REFINEMENT, iou=0.0)
    return StageResult(sample_id, Stage.REFINEMENT, iou=mask_iou(predicted, gt))


def score_transformation(
    predicted_after: BinaryMask,
    gt_before: BinaryMask,
    gt_transform: AffineTransform,
    sample_id: str = "",
) -> StageResult:
    expected = warp_mask(gt_before, gt_transform)
    return StageResult(sample_id, Stage.TRANSFORMATION, iou=mask_iou(predicted_after, expected))


async def score_final(
    edited: EditedImage,
    gt_before: BinaryMask,
    gt_transform: AffineTransform,
    detector: FinalDetector,
    class_label: str,
    sample_id: str = "",
) -> StageResult:
    """Re-detect the object in the edited image; no detection scores as an empty mask"""
    expected = warp_mask(gt_before, gt_transform)
    try:
        found = await detector.detect(edited, class_label)
        if found is None:
            found = BinaryMask.empty(edited.width, edited.height)
        iou = mask_iou(found, expected)
    except PoemError as e:
        logger.error(f"{sample_id}: final-stage detection failed: {e}")
        return failed(sample_id, Stage.FINAL_EDIT, e)
    return StageResult(sample_id, Stage.FINAL_EDIT, iou=iou)
