from backend.evaluation.aggregate import (
    AVG,
    STAGE_ORDER,
    StageReport,
    aggregate,
    percent,
    results_frame,
    row_name,
    verify_report,
)
from backend.evaluation.report import render_csv, render_markdown, report_frame, write_report
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

__all__ = [
    "AVG",
    "STAGE_ORDER",
    "Stage",
    "StageReport",
    "StageResult",
    "aggregate",
    "failed",
    "percent",
    "render_csv",
    "render_markdown",
    "report_frame",
    "results_frame",
    "row_name",
    "score_final",
    "score_grounding",
    "score_refinement",
    "score_transformation",
    "select_target_detection",
    "verify_report",
    "write_report",
]
