"""
Reduce per-sample stage results into report tables.

Means are micro-averages: every scored sample weighs the same, so Avg is the
mean over all samples of a row, not the mean of its category cells. Errored
samples are counted per row and left out of every mean.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Union

import pandas as pd
from loguru import logger

from backend.dataset.manifest import Manifest
from backend.dataset.types import EditSample
from backend.editops import CATEGORY_ORDER
from backend.evaluation.scoring import Stage, StageResult
from backend.exceptions import UnknownSampleId
from backend.schemas import DifficultyEnum

AVG = "Avg"
STAGE_ORDER = (Stage.GROUNDING, Stage.REFINEMENT, Stage.TRANSFORMATION, Stage.FINAL_EDIT)
DIFFICULTY_ORDER = (DifficultyEnum.EASY, DifficultyEnum.MEDIUM, DifficultyEnum.HARD)

RESULT_COLUMNS = [
    "label",
    "sample_id",
    "stage",
    "category",
    "difficulty",
    "class_label",
    "iou",
    "fallback_used",
    "error",
]


def percent(values: Iterable[float]) -> Optional[float]:
    """Mean as a percentage with one decimal; None for no values"""
    values = list(values)
    if not values:
        return None
    return round(math.fsum(values) / len(values) * 100.0, 1)


def row_name(label: str, stage: Stage) -> str:
    return f"{label} / {stage.value}"


@dataclass
class StageReport:
    rows: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    sample_counts: Dict[str, int] = field(default_factory=dict)
    difficulty_rows: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    errors: Dict[str, int] = field(default_factory=dict)
    label: str = "run"
    config_hash: str = ""
    template_versions: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def columns(self) -> List[str]:
        return [c.value for c in CATEGORY_ORDER] + [AVG]


def _lookup(samples: Union[Manifest, Iterable[EditSample]]) -> Mapping[str, EditSample]:
    if isinstance(samples, Manifest):
        return {s.sample_id: s for s in samples.samples}
    return {s.sample_id: s for s in samples}


def results_frame(
    results: Iterable[StageResult],
    samples: Union[Manifest, Iterable[EditSample]],
    label: str = "run",
) -> pd.DataFrame:
    """One row per (sample, stage) joined with the sample's category and difficulty"""
    index = _lookup(samples)
    records = []
    for r in results:
        sample = index.get(r.sample_id)
        if sample is None:
            raise UnknownSampleId(r.sample_id)
        records.append(
            {
                "label": label,
                "sample_id": r.sample_id,
                "stage": r.stage.value,
                "category": sample.category.value,
                "difficulty": sample.difficulty.value,
                "class_label": sample.instance.class_label,
                "iou": r.iou,
                "fallback_used": r.fallback_used,
                "error": r.error,
            }
        )
    df = pd.DataFrame(records, columns=RESULT_COLUMNS)
    return df.sort_values(["label", "sample_id", "stage"], kind="mergesort").reset_index(drop=True)


def _table(df: pd.DataFrame) -> Dict[str, Dict[str, Dict]]:
    """(rows, difficulty_rows, errors) recomputed from a results frame"""
    rows: Dict[str, Dict[str, Optional[float]]] = {}
    difficulty_rows: Dict[str, Dict[str, Optional[float]]] = {}
    errors: Dict[str, int] = {}
    for (label, stage_value), group in df.groupby(["label", "stage"], sort=False):
        name = row_name(label, Stage(stage_value))
        scored = group[group["error"].isna()]
        errors[name] = int(len(group) - len(scored))
        cells = {}
        for category in CATEGORY_ORDER:
            cells[category.value] = percent(scored.loc[scored["category"] == category.value, "iou"])
        cells[AVG] = percent(scored["iou"])
        rows[name] = cells
        difficulty_rows[name] = {
            d.value: percent(scored.loc[scored["difficulty"] == d.value, "iou"]) for d in DIFFICULTY_ORDER
        }
    return {"rows": rows, "difficulty_rows": difficulty_rows, "errors": errors}


def _ordered(mapping: Dict[str, object], labels: List[str]) -> Dict[str, object]:
    names = [row_name(label, stage) for label in labels for stage in STAGE_ORDER]
    return {name: mapping[name] for name in names if name in mapping}


def aggregate(
    results: Iterable[StageResult],
    samples: Union[Manifest, Iterable[EditSample]],
    label: str = "run",
    config_hash: str = "",
    template_versions: Optional[Dict[str, str]] = None,
    seed: Optional[int] = None,
) -> StageReport:
    results = list(results)
    df = results_frame(results, samples, label)
    table = _table(df)
    counts = df.drop_duplicates("sample_id")["category"].value_counts()
    report = StageReport(
        rows=_ordered(table["rows"], [label]),
        sample_counts={c.value: int(counts.get(c.value, 0)) for c in CATEGORY_ORDER},
        difficulty_rows=_ordered(table["difficulty_rows"], [label]),
        errors=_ordered(table["errors"], [label]),
        label=label,
        config_hash=config_hash,
        template_versions=dict(template_versions or {}),
        seed=seed,
    )
    logger.info(
        f"Aggregated {len(results)} stage results over {int(counts.sum())} samples "
        f"({sum(report.errors.values())} errors)"
    )
    return report


def _same(a: Optional[float], b: Optional[float]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) < 1e-9


def verify_report(report: StageReport, per_sample: Union[str, pd.DataFrame]) -> List[str]:
    """Recompute every report cell from the raw per-sample table; returns the mismatches"""
    if isinstance(per_sample, pd.DataFrame):
        df = per_sample.copy()
    else:
        df = pd.read_csv(per_sample, float_precision="round_trip", dtype={"label": str, "sample_id": str})
    df["error"] = df["error"].where(df["error"].notna() & (df["error"].astype(str) != ""), None)
    df = df[df["label"].astype(str) == report.label]
    table = _table(df)
    problems = []
    for name, cells in report.rows.items():
        derived = table["rows"].get(name)
        if derived is None:
            problems.append(f"{name}: row has no per-sample data")
            continue
        for column, value in cells.items():
            if not _same(value, derived.get(column)):
                problems.append(f"{name} / {column}: report {value} != recomputed {derived.get(column)}")
        if report.errors.get(name, 0) != table["errors"].get(name, 0):
            problems.append(f"{name} / errors: report {report.errors.get(name)} != recomputed {table['errors'].get(name)}")
    for name, cells in report.difficulty_rows.items():
        derived = table["difficulty_rows"].get(name, {})
        for column, value in cells.items():
            if not _same(value, derived.get(column)):
                problems.append(f"{name} / {column}: report {value} != recomputed {derived.get(column)}")
    for name in table["rows"]:
        if name not in report.rows:
            problems.append(f"{name}: per-sample data has no report row")
    if problems:
        logger.warning(f"Report verification found {len(problems)} mismatches")
    else:
        logger.info(f"Report verification passed for {len(report.rows)} rows")
    return problems
