"""
Markdown and CSV renderings of a StageReport.
"""
import json
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd
from loguru import logger

from backend.evaluation.aggregate import AVG, DIFFICULTY_ORDER, StageReport

MISSING = "-"
PER_SAMPLE_CSV = "per_sample.csv"
REPORT_MD = "report.md"
REPORT_CSV = "report.csv"


def _cell(value: Optional[float]) -> str:
    return MISSING if value is None else f"{value:.1f}"


def _provenance(report: StageReport) -> Dict[str, str]:
    return {
        "label": report.label,
        "config_hash": report.config_hash,
        "template_versions": json.dumps(report.template_versions, sort_keys=True),
        "seed": "" if report.seed is None else str(report.seed),
    }


def render_markdown(report: StageReport) -> str:
    lines = [f"# Stage-wise IoU (%) for {report.label}", ""]
    lines.append(f"- config hash: `{report.config_hash or 'n/a'}`")
    versions = ", ".join(f"{k}={v}" for k, v in sorted(report.template_versions.items())) or "n/a"
    lines.append(f"- template versions: {versions}")
    lines.append(f"- seed: {MISSING if report.seed is None else report.seed}")
    lines.append(f"- {AVG} is the sample-weighted mean; errored samples are excluded from means and counted")
    lines.append("")

    header = ["Method / Stage"] + report.columns + ["errors"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|")
    for name, cells in report.rows.items():
        values = [_cell(cells.get(c)) for c in report.columns]
        lines.append("| " + " | ".join([name] + values + [str(report.errors.get(name, 0))]) + " |")

    lines += ["", "## Samples per category", ""]
    categories = list(report.sample_counts)
    lines.append("| " + " | ".join(categories + ["Total"]) + " |")
    lines.append("|" + "|".join(["---:"] * (len(categories) + 1)) + "|")
    counts = [str(report.sample_counts[c]) for c in categories]
    lines.append("| " + " | ".join(counts + [str(sum(report.sample_counts.values()))]) + " |")

    if report.difficulty_rows:
        lines += ["", "## By difficulty", ""]
        buckets = [d.value for d in DIFFICULTY_ORDER]
        lines.append("| " + " | ".join(["Method / Stage"] + buckets) + " |")
        lines.append("|" + "|".join(["---"] + ["---:"] * len(buckets)) + "|")
        for name, cells in report.difficulty_rows.items():
            lines.append("| " + " | ".join([name] + [_cell(cells.get(b)) for b in buckets]) + " |")
    return "\n".join(lines) + "\n"


def report_frame(report: StageReport) -> pd.DataFrame:
    """Long-form table: one row per (row, column) cell, provenance on every row"""
    provenance = _provenance(report)
    records = []
    for name, cells in report.rows.items():
        for column in report.columns:
            records.append({"row": name, "table": "category", "column": column, "value": cells.get(column)})
        records.append({"row": name, "table": "errors", "column": "errors", "value": report.errors.get(name, 0)})
    for name, cells in report.difficulty_rows.items():
        for bucket in DIFFICULTY_ORDER:
            records.append({"row": name, "table": "difficulty", "column": bucket.value, "value": cells.get(bucket.value)})
    for category, count in report.sample_counts.items():
        records.append({"row": "samples", "table": "counts", "column": category, "value": count})
    df = pd.DataFrame(records, columns=["row", "table", "column", "value"])
    for key, value in provenance.items():
        df[key] = value
    return df


def render_csv(report: StageReport) -> str:
    return report_frame(report).to_csv(index=False)


def write_report(
    report: StageReport,
    out_dir: Union[str, Path],
    per_sample: Optional[pd.DataFrame] = None,
) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"markdown": out_dir / REPORT_MD, "csv": out_dir / REPORT_CSV}
    paths["markdown"].write_text(render_markdown(report), encoding="utf-8")
    paths["csv"].write_text(render_csv(report), encoding="utf-8")
    if per_sample is not None:
        paths["per_sample"] = out_dir / PER_SAMPLE_CSV
        per_sample.to_csv(paths["per_sample"], index=False)
    logger.info(f"Wrote report for {report.label} to {out_dir}")
    return paths
