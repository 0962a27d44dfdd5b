"""
Pixel-space blend of a repositioned object into its image.

The output keeps every pixel outside before | after, places the object
pixels warped by the transform inside after, and fills the vacated part of
before with a filler. Object pixels are warped with the same inverse-mapping
rule as warp_mask, so the placed pixels and the target mask agree exactly.
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger

from backend.compositor.fill import inpaint_mean, noise_fill, telea_fill
from backend.exceptions import DimensionMismatch, EmptyMask
from backend.geometry import AffineTransform, BinaryMask, warp_mask, warp_raster
from backend.services.contracts import EditedImage

FILLERS = ("inpaint", "telea", "noise")


@dataclass(frozen=True)
class BlendRegions:
    source_mask: BinaryMask
    target_mask: BinaryMask

    @property
    def fill_region(self) -> BinaryMask:
        return self.source_mask - self.target_mask


def regions(before: BinaryMask, transform: AffineTransform) -> BlendRegions:
    return BlendRegions(source_mask=before, target_mask=warp_mask(before, transform))


def composite(
    image: np.ndarray,
    before: BinaryMask,
    transform: AffineTransform,
    seed: int = 0,
    filler: str = "inpaint",
) -> EditedImage:
    if filler not in FILLERS:
        raise ValueError(f"filler must be one of {FILLERS}, got {filler!r}")
    pixels = np.asarray(image)
    if pixels.shape[:2] != before.shape:
        raise DimensionMismatch(
            f"image is {pixels.shape[1]}x{pixels.shape[0]} but the mask is {before.width}x{before.height}"
        )
    if before.is_empty():
        raise EmptyMask("composite needs a non-empty object mask")

    blend = regions(before, transform)
    target = blend.target_mask.bits
    fill = blend.fill_region.bits

    known = ~(before.bits | target)
    if filler == "noise":
        out = noise_fill(pixels, fill, seed)
    elif filler == "telea":
        out = telea_fill(pixels, fill, known)
    else:
        out = inpaint_mean(pixels, fill, known)

    warped = warp_raster(pixels, transform)
    out[target] = warped[target]

    logger.debug(
        f"Composited object: moved {before.area} px to {blend.target_mask.area} px, filled {int(fill.sum())} px ({filler})"
    )
    return EditedImage(
        pixels=out,
        provenance=f"compositor/{filler}/seed={seed}",
        object_mask=blend.target_mask,
    )
