"""
Builds the stage backends of a pipeline run from its settings.
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Optional

import httpx
from loguru import logger

from backend.config.settings import STAGES, PipelineSettings, StageBackendSettings
from backend.services.contracts import Drawer, FinalDetector, Grounder, GroundTruthObject, Reasoner, Refiner
from backend.services.drawing_service import DrawnMaskDetector, HttpDrawer, ReferenceDrawer, RefinerDetector
from backend.services.grounding_service import HttpGrounder, JitterGrounder, OracleGrounder
from backend.services.reasoning_service import CompilerReasoner, HttpReasoner, NoisyReasoner
from backend.services.refinement_service import HttpRefiner, OracleRefiner

if TYPE_CHECKING:
    from backend.dataset.types import EditSample


@dataclass
class StageBackends:
    grounder: Grounder
    refiner: Refiner
    reasoner: Reasoner
    drawer: Drawer
    detector: FinalDetector


def ground_truth_objects(sample: "EditSample"):
    """Every annotated object of the sample's image, the edit target among them, in instance_id order"""
    instances = sorted((sample.instance,) + tuple(sample.other_objects), key=lambda i: i.instance_id)
    return [GroundTruthObject(object_id=i.instance_id, class_label=i.class_label, mask=i.gt_mask) for i in instances]


class BackendSet:
    """HTTP backends are shared across samples; oracle backends are bound to one sample's annotations"""

    def __init__(self, settings: PipelineSettings, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.settings = settings
        self.transport = transport
        self._shared: Dict[str, Any] = {}
        for stage in STAGES:
            stage_settings = settings.stage(stage)
            if stage_settings.kind == "http":
                self._shared[stage] = self._http_backend(stage, stage_settings)
        logger.info(f"Backend set '{settings.label}': {self.describe()}")

    def _http_backend(self, stage: str, s: StageBackendSettings):
        if stage == "grounder":
            return HttpGrounder(s.http, transport=self.transport)
        if stage == "refiner":
            return HttpRefiner(s.http, prompt_mode=s.options.get("prompt_mode", "class"), transport=self.transport)
        if stage == "reasoner":
            return HttpReasoner(s.http, transport=self.transport)
        return HttpDrawer(s.http, refine=bool(s.options.get("refine", False)), transport=self.transport)

    def describe(self) -> Dict[str, str]:
        return {stage: self.settings.stage(stage).kind for stage in STAGES}

    def bind(self, sample: "EditSample") -> StageBackends:
        objects = ground_truth_objects(sample)
        size = (sample.instance.image_width, sample.instance.image_height)
        s = self.settings

        grounder = self._shared.get("grounder")
        if grounder is None:
            if s.grounder.kind == "jitter":
                grounder = JitterGrounder(objects, jitter=float(s.grounder.options.get("jitter", 0.0)), seed=sample.seed)
            else:
                grounder = OracleGrounder(objects)

        refiner = self._shared.get("refiner") or OracleRefiner(objects)

        reasoner = self._shared.get("reasoner")
        if reasoner is None:
            if s.reasoner.kind == "noisy":
                reasoner = NoisyReasoner(size, relative_error=float(s.reasoner.options.get("relative_error", 0.2)))
            else:
                reasoner = CompilerReasoner(size)

        drawer = self._shared.get("drawer") or ReferenceDrawer(
            filler=s.drawer.options.get("filler", "inpaint"), seed=sample.seed
        )

        detector = RefinerDetector(refiner) if s.detector == "refiner" else DrawnMaskDetector()
        return StageBackends(grounder=grounder, refiner=refiner, reasoner=reasoner, drawer=drawer, detector=detector)
