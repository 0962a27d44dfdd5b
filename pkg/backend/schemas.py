from pydantic import BaseModel, Field
from typing import Optional, List, Dict, Any
from enum import Enum

class StageEnum(str, Enum):
    GROUNDING = "Grounding"
    REFINEMENT = "Refinement"
    TRANSFORMATION = "Transformation"
    FINAL_EDIT = "FinalEdit"

class DifficultyEnum(str, Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"

class PromptModeEnum(str, Enum):
    CLASS = "class"
    POINT = "point"

# Grounding reply JSON emitted by the grounding model

class GroundingObject(BaseModel):
    object_id: int
    class_label: str = Field(min_length=1)
    bbox: List[float] = Field(min_length=4, max_length=4)
    point: List[float] = Field(min_length=2, max_length=2)

class GroundingReplyPayload(BaseModel):
    objects: List[GroundingObject] = Field(default_factory=list)
    scene: Optional[str] = None
    relationships: Optional[str] = None
    background_prompt: Optional[str] = None
    generation_prompt: Optional[str] = None

# HTTP wire protocol (protocol.md)

class DetectionPayload(BaseModel):
    object_id: int
    class_label: str
    bbox: List[float] = Field(min_length=4, max_length=4)
    point: List[float] = Field(min_length=2, max_length=2)

class GroundRequest(BaseModel):
    image_b64: str
    prompt: str
    template_version: str = "v1"

class GroundResponse(BaseModel):
    reply: str

class RefineRequest(BaseModel):
    image_b64: str
    detections: List[DetectionPayload]
    prompt_mode: PromptModeEnum = PromptModeEnum.CLASS

class RefinedObject(BaseModel):
    object_id: int
    mask_b64: str

class RefineResponse(BaseModel):
    objects: List[RefinedObject]

class ReasonRequest(BaseModel):
    prompt: str

class ReasonResponse(BaseModel):
    reply: str

class DrawRequest(BaseModel):
    image_b64: str
    before_mask_b64: str
    after_mask_b64: str
    background_prompt: str = ""
    generation_prompt: str = ""
    # a11, a12, a13, a21, a22, a23
    transform: Optional[List[float]] = Field(default=None, min_length=6, max_length=6)
    refine: bool = False

class DrawResponse(BaseModel):
    image_b64: str
    mask_b64: Optional[str] = None

class HealthResponse(BaseModel):
    status: str
    version: str
    scripted_replies_left: int = 0

# Result summaries returned by the CLI and stored with runs

class StageSummary(BaseModel):
    stage: StageEnum
    scored: int
    errors: int
    mean_iou: Optional[float] = None

class RunSummary(BaseModel):
    run_id: int
    label: str
    config_hash: str
    seed: int
    stages: List[StageSummary]
    errors: int = 0
    details: Optional[Dict[str, Any]] = None
