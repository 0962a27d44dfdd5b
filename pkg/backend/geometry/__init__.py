"""
Affine algebra, binary masks, warping and IoU.
"""
from backend.geometry.transforms import (
    SINGULAR_EPS,
    AffineTransform,
    BoundingBox,
    Point,
    about_anchor,
    bbox_iou,
    compose,
)
from backend.geometry.masks import (
    BinaryMask,
    bbox_of_mask,
    image_from_b64,
    image_to_b64,
    load_image,
    load_mask,
    mask_from_array,
    mask_from_b64,
    mask_iou,
    mask_to_b64,
    save_image,
    save_mask,
    source_indices,
    warp_mask,
    warp_raster,
)

__all__ = [
    "SINGULAR_EPS",
    "AffineTransform",
    "BoundingBox",
    "Point",
    "about_anchor",
    "bbox_iou",
    "compose",
    "BinaryMask",
    "bbox_of_mask",
    "image_from_b64",
    "image_to_b64",
    "load_image",
    "load_mask",
    "mask_from_array",
    "mask_from_b64",
    "mask_iou",
    "mask_to_b64",
    "save_image",
    "save_mask",
    "source_indices",
    "warp_mask",
    "warp_raster",
]
