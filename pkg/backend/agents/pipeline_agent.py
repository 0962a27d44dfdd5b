import asyncio
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from loguru import logger

from backend.database.database import RESULTS_DB, get_db_session, get_session_factory
from backend.database.models import PipelineRun, RunStatus, StageRecord
from backend.dataset.manifest import Manifest
from backend.dataset.types import EditSample
from backend.editops import label_mentioned
from backend.evaluation.scoring import (
    Stage,
    StageResult,
    failed,
    score_final,
    score_grounding,
    score_refinement,
    score_transformation,
    select_target_detection,
)
from backend.exceptions import ConfigError, TargetNotFound
from backend.geometry import load_image, save_image, save_mask, warp_mask
from backend.llmproto import Detection
from backend.schemas import RunSummary, StageSummary
from backend.services.refinement_service import require_object
from backend.services.registry import BackendSet, StageBackends

# How many stages each --stage selection runs; stages are cumulative
STAGE_DEPTH = {"ground": 1, "refine": 2, "reason": 3, "draw": 4, "all": 4}
ARTIFACT_DIR = "artifacts"


@dataclass
class SampleOutcome:
    sample_id: str
    results: List[StageResult] = field(default_factory=list)
    artifacts: Dict[Stage, str] = field(default_factory=dict)
    details: Dict[Stage, Dict[str, Any]] = field(default_factory=dict)
    # Stage in progress; an exception is recorded against it
    current: Stage = Stage.GROUNDING


def resolve_target(target_id: int, detections: Sequence[Detection], instruction: str) -> int:
    """The reasoner's id when it names a detection, else the detection whose class the instruction mentions"""
    if any(d.object_id == target_id for d in detections):
        return target_id
    for det in detections:
        if label_mentioned(det.class_label, instruction):
            logger.warning(
                f"Reasoner picked unknown id {target_id}; falling back to {det.class_label} #{det.object_id}"
            )
            return det.object_id
    raise TargetNotFound(f"reasoner picked id {target_id} and no detection class occurs in the instruction")


class PipelineAgent:
    """Runs grounding, refinement, reasoning and drawing over a manifest and records stage IoUs"""

    def __init__(
        self,
        backends: BackendSet,
        out_dir: Union[str, Path],
        stage: str = "all",
        max_concurrency: int = 4,
        save_artifacts: bool = True,
    ):
        if stage not in STAGE_DEPTH:
            raise ConfigError(f"unknown stage selection {stage!r}; expected one of {sorted(STAGE_DEPTH)}")
        if max_concurrency < 1:
            raise ConfigError("max_concurrency must be at least 1")
        self.backends = backends
        self.out_dir = Path(out_dir)
        self.stage = stage
        self.depth = STAGE_DEPTH[stage]
        self.max_concurrency = max_concurrency
        self.save_artifacts = save_artifacts
        self.running = False
        self.run_statistics = {
            "samples_processed": 0,
            "samples_skipped": 0,
            "stage_errors": 0,
            "grounding_fallbacks": 0,
            "target_fallbacks": 0,
        }

    def stop(self):
        """Stop picking up new samples; samples already in flight finish"""
        self.running = False
        logger.info(f"Pipeline agent stopped. Statistics: {self.run_statistics}")

    async def run(self, manifest: Union[Manifest, Sequence[EditSample]]) -> RunSummary:
        samples = list(manifest.samples if isinstance(manifest, Manifest) else manifest)
        settings = self.backends.settings
        self.out_dir.mkdir(parents=True, exist_ok=True)
        session_factory = get_session_factory(self.out_dir)
        self.running = True

        db = session_factory()
        try:
            run = PipelineRun(
                label=settings.label,
                config_hash=settings.config_hash(),
                template_versions=settings.template_versions(),
                seed=settings.seed,
                stage_selection=self.stage,
                manifest_path=str(manifest.path) if isinstance(manifest, Manifest) and manifest.path else None,
                backends=self.backends.describe(),
                status=RunStatus.RUNNING.value,
                sample_count=len(samples),
                started_at=datetime.utcnow(),
            )
            db.add(run)
            db.commit()
            logger.info(f"Pipeline run {run.id} '{run.label}' started: {len(samples)} samples, stage={self.stage}")

            semaphore = asyncio.Semaphore(self.max_concurrency)

            async def guarded(sample: EditSample) -> Optional[SampleOutcome]:
                async with semaphore:
                    if not self.running:
                        self.run_statistics["samples_skipped"] += 1
                        return None
                    return await self.process_sample(sample)

            outcomes = await asyncio.gather(*(guarded(s) for s in samples))

            all_results: List[StageResult] = []
            for outcome in outcomes:
                if outcome is None:
                    continue
                for result in outcome.results:
                    all_results.append(result)
                    db.add(
                        StageRecord(
                            run_id=run.id,
                            sample_id=result.sample_id,
                            stage=result.stage.value,
                            iou=result.iou,
                            fallback_used=result.fallback_used,
                            error=result.error,
                            artifact_path=outcome.artifacts.get(result.stage),
                            details=outcome.details.get(result.stage),
                        )
                    )

            errors = sum(1 for r in all_results if not r.ok)
            run.error_count = errors
            run.status = (RunStatus.COMPLETED if self.running else RunStatus.STOPPED).value
            run.finished_at = datetime.utcnow()
            db.commit()

            summary = self._summary(run, all_results)
            logger.info(f"Pipeline run {run.id} finished with {errors} stage errors. Statistics: {self.run_statistics}")
            return summary
        except Exception as e:
            db.rollback()
            logger.error(f"Pipeline run failed: {e}")
            raise
        finally:
            self.running = False
            db.close()

    def _summary(self, run: PipelineRun, results: List[StageResult]) -> RunSummary:
        stages = []
        for stage in (Stage.GROUNDING, Stage.REFINEMENT, Stage.TRANSFORMATION, Stage.FINAL_EDIT):
            rows = [r for r in results if r.stage is stage]
            if not rows:
                continue
            scored = [r.iou for r in rows if r.ok]
            stages.append(
                StageSummary(
                    stage=stage,
                    scored=len(scored),
                    errors=len(rows) - len(scored),
                    mean_iou=sum(scored) / len(scored) if scored else None,
                )
            )
        return RunSummary(
            run_id=run.id,
            label=run.label,
            config_hash=run.config_hash,
            seed=run.seed,
            stages=stages,
            errors=run.error_count,
            details={"statistics": dict(self.run_statistics), "out_dir": str(self.out_dir)},
        )

    def _artifact(self, name: str) -> Path:
        path = self.out_dir / ARTIFACT_DIR / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    async def process_sample(self, sample: EditSample) -> SampleOutcome:
        """Run the selected stages for one sample; a failing stage ends the sample with an error result"""
        outcome = SampleOutcome(sample.sample_id)
        backends = self.backends.bind(sample)
        try:
            await self._run_stages(sample, backends, outcome)
        except Exception as e:
            logger.error(f"{sample.sample_id}: {outcome.current.value} stage failed: {e}")
            outcome.results.append(failed(sample.sample_id, outcome.current, e))
            self.run_statistics["stage_errors"] += 1
        self.run_statistics["samples_processed"] += 1
        return outcome

    async def _run_stages(self, sample: EditSample, b: StageBackends, outcome: SampleOutcome):
        inst = sample.instance
        sid = sample.sample_id
        instruction = sample.instruction_text
        image = load_image(inst.image_path)

        outcome.current = Stage.GROUNDING
        detections, scene = await b.grounder.ground(image, instruction)
        target = select_target_detection(detections, inst.class_label, inst.gt_bbox)
        grounding = score_grounding(target.bbox if target else None, inst.gt_bbox, (inst.image_width, inst.image_height), sid)
        if grounding.fallback_used:
            self.run_statistics["grounding_fallbacks"] += 1
        outcome.results.append(grounding)
        outcome.details[Stage.GROUNDING] = {
            "detections": len(detections),
            "target_id": target.object_id if target else None,
        }
        if self.depth < 2:
            return

        outcome.current = Stage.REFINEMENT
        refined = await b.refiner.refine(image, detections)
        target_mask = refined[target.object_id].mask if target and target.object_id in refined else None
        outcome.results.append(score_refinement(target_mask, inst.gt_mask, sid))
        outcome.details[Stage.REFINEMENT] = {"refined_ids": sorted(refined)}
        if self.depth < 3:
            return

        outcome.current = Stage.TRANSFORMATION
        candidates: List[Tuple] = [
            (d.object_id, refined[d.object_id].bbox if d.object_id in refined else d.bbox, d.class_label)
            for d in detections
        ]
        reply = await b.reasoner.reason(instruction, scene, candidates)
        target_id = resolve_target(reply.target_id, detections, instruction)
        if target_id != reply.target_id:
            self.run_statistics["target_fallbacks"] += 1
        obj = require_object(refined, target_id)
        predicted_after = warp_mask(obj.mask, reply.transform)
        outcome.results.append(score_transformation(predicted_after, inst.gt_mask, sample.gt_transform, sid))
        outcome.details[Stage.TRANSFORMATION] = {
            "target_id": target_id,
            "transform": list(reply.transform.coefficients()),
            "warnings": list(reply.warnings),
        }
        if self.save_artifacts:
            rel = f"{ARTIFACT_DIR}/{sid}_after.png"
            save_mask(predicted_after, self._artifact(f"{sid}_after.png"))
            outcome.artifacts[Stage.TRANSFORMATION] = rel
        if self.depth < 4:
            return

        outcome.current = Stage.FINAL_EDIT
        edited = await b.drawer.draw(
            image,
            obj.mask,
            predicted_after,
            scene.background_prompt,
            scene.generation_prompt,
            transform=reply.transform,
        )
        final = await score_final(edited, inst.gt_mask, sample.gt_transform, b.detector, inst.class_label, sid)
        if not final.ok:
            self.run_statistics["stage_errors"] += 1
        outcome.results.append(final)
        outcome.details[Stage.FINAL_EDIT] = {"provenance": edited.provenance}
        if self.save_artifacts:
            rel = f"{ARTIFACT_DIR}/{sid}_edited.png"
            save_image(edited.pixels, self._artifact(f"{sid}_edited.png"))
            outcome.artifacts[Stage.FINAL_EDIT] = rel


def load_run(path: Union[str, Path], run_id: Optional[int] = None) -> Tuple[Dict[str, Any], List[StageResult]]:
    """Run metadata and stage results from a results database; the latest run unless run_id is given"""
    db_path = Path(path)
    if db_path.suffix != ".db":
        db_path = db_path / RESULTS_DB
    if not db_path.is_file():
        raise ConfigError(f"no results database at {db_path}")
    db = get_db_session(db_path)
    try:
        query = db.query(PipelineRun)
        run = query.filter(PipelineRun.id == run_id).first() if run_id is not None else query.order_by(PipelineRun.id.desc()).first()
        if run is None:
            raise ConfigError(f"no pipeline run {run_id if run_id is not None else ''} in {path}".replace("  ", " "))
        records = db.query(StageRecord).filter(StageRecord.run_id == run.id).order_by(StageRecord.id.asc()).all()
        results = [
            StageResult(
                sample_id=r.sample_id,
                stage=Stage(r.stage),
                iou=r.iou,
                fallback_used=bool(r.fallback_used),
                error=r.error,
            )
            for r in records
        ]
        meta = {
            "run_id": run.id,
            "label": run.label,
            "config_hash": run.config_hash,
            "template_versions": dict(run.template_versions or {}),
            "seed": run.seed,
            "stage_selection": run.stage_selection,
            "manifest_path": run.manifest_path,
            "status": run.status,
            "error_count": run.error_count,
        }
        return meta, results
    finally:
        db.close()
