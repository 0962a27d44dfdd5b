"""
Benchmark sample generation from filtered source instances.
"""
import hashlib
from collections import OrderedDict
from typing import Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from backend.config.settings import GenerationConfig
from backend.dataset.templates import render_template
from backend.dataset.types import EditSample, SourceInstance, bucket_difficulty
from backend.editops import (
    EditOp,
    FlipHorizontal,
    FlipVertical,
    Move,
    ObjectGeometry,
    Rotate,
    ScaleBy,
    ScaleToHeight,
    ScaleToWidth,
    Sequence,
    Shear,
    categorize,
    compile_op,
    parse_instruction,
)
from backend.exceptions import ExhaustedResampling, InvalidEditOp, UnparsableInstruction
from backend.geometry import mask_iou, warp_mask

# (reference text, canonical op, how many) -> candidate instructions
Paraphraser = Callable[[str, EditOp, int], List[str]]

SINGLE_KINDS = ("move", "scale", "flip", "shear", "rotate")


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class OpSampler:
    """Draws edit operations of a kind with parameters uniform in the configured ranges"""

    def __init__(self, cfg: GenerationConfig, rng: np.random.Generator):
        self.ranges = cfg.ranges
        self.rng = rng

    def _signed(self, bounds, digits: int) -> float:
        lo, hi = bounds
        sign = -1.0 if self.rng.random() < 0.5 else 1.0
        return sign * round(float(self.rng.uniform(lo, hi)), digits)

    def draw(self, kind: str, inst: SourceInstance) -> EditOp:
        rng = self.rng
        if kind == "move":
            return Move(self._signed(self.ranges.translation, 0), self._signed(self.ranges.translation, 0))
        if kind == "scale":
            factor = round(float(rng.uniform(*self.ranges.scale)), 2)
            variant = int(rng.integers(4))
            if variant == 0:
                return ScaleBy(factor, factor)
            if variant == 1:
                return ScaleBy(factor, 1.0) if rng.random() < 0.5 else ScaleBy(1.0, factor)
            if variant == 2:
                return ScaleToWidth(float(max(1, round(factor * inst.gt_bbox.width))))
            return ScaleToHeight(float(max(1, round(factor * inst.gt_bbox.height))))
        if kind == "flip":
            return FlipHorizontal() if rng.random() < 0.5 else FlipVertical()
        if kind == "shear":
            k = self._signed(self.ranges.shear, 2)
            return Shear(k, 0.0) if rng.random() < 0.5 else Shear(0.0, k)
        if kind == "rotate":
            return Rotate(self._signed(self.ranges.rotation, 1))
        if kind == "mix":
            first, second = rng.choice(len(SINGLE_KINDS), size=2, replace=False)
            return Sequence((self.draw(SINGLE_KINDS[first], inst), self.draw(SINGLE_KINDS[second], inst)))
        raise InvalidEditOp(f"unknown transform kind {kind!r}")


def _accept_paraphrases(candidates: List[str], op: EditOp, image_ref: str) -> List[str]:
    accepted = []
    for text in candidates:
        try:
            if parse_instruction(text) == op:
                accepted.append(text)
                continue
        except UnparsableInstruction:
            pass
        logger.warning(f"{image_ref}: rejected paraphrase {text!r}")
    return accepted


def _instructions(op: EditOp, inst: SourceInstance, count: int, paraphraser: Optional[Paraphraser]) -> List[str]:
    templated = [render_template(op, inst.class_label, j) for j in range(count)]
    if paraphraser is None:
        return templated
    accepted = _accept_paraphrases(paraphraser(templated[0], op, count), op, inst.image_ref)[:count]
    return accepted + templated[len(accepted):]


def generate(
    instances: List[SourceInstance],
    cfg: GenerationConfig,
    paraphraser: Optional[Paraphraser] = None,
    annotations: Optional[List[SourceInstance]] = None,
) -> List[EditSample]:
    """
    transforms_per_image edits per image, each rendered paraphrases_per_transform
    times. Every image gets its own generator seeded from (cfg.seed, image), so
    the output does not depend on the order or subset of other images.

    `annotations` is the unfiltered ingest; each sample records the other
    annotated objects of its image from it (default: `instances`).
    """
    by_image: Dict[str, List[SourceInstance]] = OrderedDict()
    for inst in sorted(instances, key=lambda i: (i.image_ref, i.instance_id)):
        by_image.setdefault(inst.image_ref, []).append(inst)
    annotated: Dict[str, List[SourceInstance]] = {}
    source = annotations if annotations is not None else instances
    for inst in sorted(source, key=lambda i: (i.image_ref, i.instance_id)):
        annotated.setdefault(inst.image_ref, []).append(inst)

    samples: List[EditSample] = []
    for image_ref, image_instances in by_image.items():
        rng = np.random.default_rng(derive_seed(cfg.seed, image_ref))
        sampler = OpSampler(cfg, rng)
        deck: List[str] = []
        drawn = set()
        for k in range(cfg.transforms_per_image):
            if not deck:
                deck = [cfg.kinds[i] for i in rng.permutation(len(cfg.kinds))]
            kind = deck.pop(0)
            inst, op, transform, after = None, None, None, None
            for attempt in range(1, cfg.max_resample_attempts + 1):
                inst = image_instances[int(rng.integers(len(image_instances)))]
                op = sampler.draw(kind, inst)
                if (inst.instance_id, op) in drawn:
                    continue
                transform = compile_op(op, ObjectGeometry(inst.gt_bbox, inst.image_width, inst.image_height))
                after = warp_mask(inst.gt_mask, transform)
                if not after.is_empty():
                    break
                logger.debug(f"{image_ref}: {op!r} leaves no pixels inside the image, resampling")
            else:
                raise ExhaustedResampling(image_ref, cfg.max_resample_attempts)
            drawn.add((inst.instance_id, op))

            difficulty = bucket_difficulty(mask_iou(inst.gt_mask, after), cfg.t_easy, cfg.t_hard)
            texts = _instructions(op, inst, cfg.paraphrases_per_transform, paraphraser)
            others = tuple(a for a in annotated.get(image_ref, []) if a.instance_id != inst.instance_id)
            for j, text in enumerate(texts):
                sample_id = f"{image_ref}_{inst.instance_id}_t{k}_p{j}"
                samples.append(
                    EditSample(
                        sample_id=sample_id,
                        instance=inst,
                        instruction_text=text,
                        canonical_op=op,
                        gt_transform=transform,
                        gt_mask_after=after,
                        category=categorize(op),
                        difficulty=difficulty,
                        seed=derive_seed(cfg.seed, sample_id) % (2 ** 31),
                        other_objects=others,
                    )
                )

    for sample in samples:
        problems = sample.violations()
        if problems:
            raise RuntimeError(f"generated sample {sample.sample_id} is inconsistent: {'; '.join(problems)}")

    samples.sort(key=lambda s: s.sample_id)
    logger.info(f"Generated {len(samples)} samples from {len(by_image)} images (seed {cfg.seed})")
    return samples
