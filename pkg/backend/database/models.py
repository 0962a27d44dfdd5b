from enum import Enum

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class RunStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    STOPPED = "stopped"
    FAILED = "failed"


class PipelineRun(Base):
    __tablename__ = "pipeline_runs"

    id = Column(Integer, primary_key=True, index=True)

    label = Column(String(200), nullable=False)
    config_hash = Column(String(64), nullable=False)
    template_versions = Column(JSON)  # stage name -> prompt template version
    seed = Column(Integer, default=0)
    stage_selection = Column(String(20), default="all")  # all, ground, refine, reason, draw
    manifest_path = Column(Text)
    backends = Column(JSON)  # stage name -> backend description

    status = Column(String(20), default=RunStatus.RUNNING.value, index=True)
    sample_count = Column(Integer, default=0)
    error_count = Column(Integer, default=0)

    started_at = Column(DateTime)
    finished_at = Column(DateTime)
    created_at = Column(DateTime, server_default=func.now())

    results = relationship("StageRecord", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<PipelineRun(id={self.id}, label={self.label}, status={self.status})>"


class StageRecord(Base):
    __tablename__ = "stage_results"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("pipeline_runs.id"), index=True, nullable=False)
    sample_id = Column(String(200), index=True, nullable=False)
    stage = Column(String(20), nullable=False)  # Grounding, Refinement, Transformation, FinalEdit

    iou = Column(Float)  # NULL exactly when error is set
    fallback_used = Column(Boolean, default=False)
    error = Column(Text)

    artifact_path = Column(Text)  # predicted after-mask or edited image, relative to the run directory
    details = Column(JSON)  # target id, warnings, transform coefficients

    created_at = Column(DateTime, server_default=func.now())

    run = relationship("PipelineRun", back_populates="results")
