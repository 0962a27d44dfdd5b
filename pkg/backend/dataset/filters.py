"""
Instance filters applied before benchmark generation.
"""
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

from loguru import logger

from backend.config.settings import GenerationConfig
from backend.dataset.types import SourceInstance

# Reported in this order; an instance is tallied under the first rule it breaks
DROP_REASONS = ("too_many_objects", "duplicate_class", "truncated", "area", "boundary")


@dataclass
class FilterResult:
    kept: List[SourceInstance]
    dropped: List[Tuple[SourceInstance, str]] = field(default_factory=list)

    @property
    def tallies(self) -> Dict[str, int]:
        counts = Counter(reason for _, reason in self.dropped)
        return {reason: counts.get(reason, 0) for reason in DROP_REASONS}


def _drop_reason(inst: SourceInstance, siblings: List[SourceInstance], duplicated: bool, cfg: GenerationConfig) -> str:
    if len(siblings) > cfg.max_foreground_objects:
        return "too_many_objects"
    if duplicated:
        return "duplicate_class"
    if inst.truncated:
        return "truncated"
    if not cfg.min_object_area_fraction <= inst.area_fraction <= cfg.max_object_area_fraction:
        return "area"
    if inst.gt_mask.touches_border():
        return "boundary"
    return ""


def images_with_duplicate_classes(by_image: Dict[str, List[SourceInstance]]) -> Set[str]:
    """Image refs holding two or more instances of one class; every instance of such an image is dropped"""
    return {
        ref
        for ref, siblings in by_image.items()
        if any(n > 1 for n in Counter(s.class_label for s in siblings).values())
    }


def filter_instances(instances: List[SourceInstance], cfg: GenerationConfig) -> FilterResult:
    by_image: Dict[str, List[SourceInstance]] = defaultdict(list)
    for inst in instances:
        by_image[inst.image_ref].append(inst)
    duplicated = images_with_duplicate_classes(by_image)

    result = FilterResult(kept=[])
    for inst in instances:
        reason = _drop_reason(inst, by_image[inst.image_ref], inst.image_ref in duplicated, cfg)
        if reason:
            result.dropped.append((inst, reason))
            logger.debug(f"Dropped {inst.key} ({inst.class_label}): {reason}")
        else:
            result.kept.append(inst)

    summary = ", ".join(f"{k}={v}" for k, v in result.tallies.items() if v)
    logger.info(f"Filters kept {len(result.kept)}/{len(instances)} instances ({summary or 'nothing dropped'})")
    return result
