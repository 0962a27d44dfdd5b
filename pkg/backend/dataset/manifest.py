"""
Benchmark manifest: one JSON document plus per-sample before/after mask PNGs.
"""
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from loguru import logger

from backend.config.settings import DEFAULT_DIFFICULTY_THRESHOLDS, GenerationConfig
from backend.dataset.types import Difficulty, EditSample, SourceInstance
from backend.editops import EditCategory, op_from_dict, op_to_dict
from backend.exceptions import ConfigError, UnknownSampleId
from backend.geometry import AffineTransform, BinaryMask, bbox_of_mask, load_mask, save_mask

SCHEMA_VERSION = "1"
MASK_DIR = "masks"


@dataclass
class Manifest:
    samples: List[EditSample]
    thresholds: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DIFFICULTY_THRESHOLDS))
    generation: Optional[Dict[str, Any]] = None
    config_hash: Optional[str] = None
    path: Optional[Path] = None

    def __post_init__(self):
        self._index = {s.sample_id: s for s in self.samples}

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._index

    def get(self, sample_id: str) -> EditSample:
        try:
            return self._index[sample_id]
        except KeyError:
            raise UnknownSampleId(sample_id) from None


def _relative(path: Path, base: Path) -> str:
    try:
        return Path(os.path.relpath(Path(path).resolve(), base.resolve())).as_posix()
    except ValueError:
        return Path(path).resolve().as_posix()


def _object_mask_path(inst: SourceInstance) -> str:
    return f"{MASK_DIR}/{inst.image_ref}_{inst.instance_id}_object.png"


def _sample_record(sample: EditSample, out_dir: Path) -> Dict[str, Any]:
    inst = sample.instance
    others = []
    for other in sample.other_objects:
        rel = _object_mask_path(other)
        save_mask(other.gt_mask, out_dir / rel)
        others.append(
            {
                "instance_id": other.instance_id,
                "class_label": other.class_label,
                "truncated": other.truncated,
                "mask": rel,
            }
        )
    before_rel = f"{MASK_DIR}/{sample.sample_id}_before.png"
    after_rel = f"{MASK_DIR}/{sample.sample_id}_after.png"
    save_mask(inst.gt_mask, out_dir / before_rel)
    save_mask(sample.gt_mask_after, out_dir / after_rel)
    return {
        "sample_id": sample.sample_id,
        "image_ref": inst.image_ref,
        "image_path": _relative(inst.image_path, out_dir),
        "image_width": inst.image_width,
        "image_height": inst.image_height,
        "instance_id": inst.instance_id,
        "class_label": inst.class_label,
        "truncated": inst.truncated,
        "gt_bbox": list(inst.gt_bbox.as_tuple()),
        "instruction": sample.instruction_text,
        "op": op_to_dict(sample.canonical_op) if sample.canonical_op is not None else None,
        "transform": list(sample.gt_transform.coefficients()),
        "category": sample.category.value,
        "difficulty": sample.difficulty.value,
        "seed": sample.seed,
        "mask_before": before_rel,
        "mask_after": after_rel,
        "other_objects": others,
    }


def write_manifest(
    samples: List[EditSample],
    out_dir: Union[str, Path],
    cfg: Optional[GenerationConfig] = None,
    filename: str = "manifest.json",
) -> Path:
    """Write masks and the manifest in sample_id order; returns the manifest path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(samples, key=lambda s: s.sample_id)
    document = {
        "schema_version": SCHEMA_VERSION,
        "generation": cfg.model_dump(mode="json") if cfg is not None else None,
        "config_hash": cfg.config_hash() if cfg is not None else None,
        "difficulty_thresholds": (
            {"t_easy": cfg.t_easy, "t_hard": cfg.t_hard} if cfg is not None else dict(DEFAULT_DIFFICULTY_THRESHOLDS)
        ),
        "samples": [_sample_record(s, out_dir) for s in ordered],
    }
    path = out_dir / filename
    path.write_text(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.info(f"Wrote manifest with {len(ordered)} samples to {path}")
    return path


def _load_sample(record: Dict[str, Any], base: Path, masks: Dict[str, BinaryMask]) -> EditSample:
    before = load_mask(base / record["mask_before"])
    after = load_mask(base / record["mask_after"])
    image_path = Path(record["image_path"])
    if not image_path.is_absolute():
        image_path = base / image_path
    instance = SourceInstance(
        image_ref=record["image_ref"],
        image_path=image_path,
        class_label=record["class_label"],
        gt_mask=before,
        gt_bbox=bbox_of_mask(before),
        image_width=int(record["image_width"]),
        image_height=int(record["image_height"]),
        instance_id=int(record["instance_id"]),
        truncated=bool(record.get("truncated", False)),
    )
    others = []
    for entry in record.get("other_objects", []):
        rel = entry["mask"]
        if rel not in masks:
            masks[rel] = load_mask(base / rel)
        others.append(
            replace(
                instance,
                class_label=entry["class_label"],
                gt_mask=masks[rel],
                gt_bbox=bbox_of_mask(masks[rel]),
                instance_id=int(entry["instance_id"]),
                truncated=bool(entry.get("truncated", False)),
            )
        )
    op = record.get("op")
    return EditSample(
        sample_id=record["sample_id"],
        instance=instance,
        instruction_text=record["instruction"],
        canonical_op=op_from_dict(op) if op is not None else None,
        gt_transform=AffineTransform.from_coefficients(record["transform"]),
        gt_mask_after=after,
        category=EditCategory(record["category"]),
        difficulty=Difficulty(record["difficulty"]),
        seed=int(record["seed"]),
        other_objects=tuple(others),
    )


def load_manifest(path: Union[str, Path]) -> Manifest:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"manifest {path} has schema version {version!r}, expected {SCHEMA_VERSION!r}")
    base = path.parent
    try:
        masks: Dict[str, BinaryMask] = {}
        samples = [_load_sample(record, base, masks) for record in document.get("samples", [])]
    except (KeyError, TypeError) as e:
        raise ConfigError(f"manifest {path} has an incomplete sample record: {e}") from e
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return Manifest(
        samples=samples,
        thresholds=document.get("difficulty_thresholds") or dict(DEFAULT_DIFFICULTY_THRESHOLDS),
        generation=document.get("generation"),
        config_hash=document.get("config_hash"),
        path=path,
    )


def samples_frame(samples: List[EditSample]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "sample_id": s.sample_id,
                "image_ref": s.instance.image_ref,
                "class_label": s.instance.class_label,
                "category": s.category.value,
                "difficulty": s.difficulty.value,
            }
            for s in samples
        ],
        columns=["sample_id", "image_ref", "class_label", "category", "difficulty"],
    )


def summarize_manifest(samples: List[EditSample]) -> Dict[str, Dict[str, int]]:
    """Sample counts per class, category and difficulty, plus totals"""
    df = samples_frame(list(samples))
    if df.empty:
        return {"class_label": {}, "category": {}, "difficulty": {}, "totals": {"samples": 0, "images": 0}}
    summary = {
        column: {str(k): int(v) for k, v in df[column].value_counts().sort_index().items()}
        for column in ("class_label", "category", "difficulty")
    }
    summary["totals"] = {"samples": int(len(df)), "images": int(df["image_ref"].nunique())}
    return summary
