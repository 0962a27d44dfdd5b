"""
Binary mask rasters, inverse-mapping warps and IoU.
"""
import base64
import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from backend.exceptions import DimensionMismatch, EmptyMask, InvalidMaskFile, SingularTransform
from backend.geometry.transforms import SINGULAR_EPS, AffineTransform, BoundingBox


class BinaryMask:
    """Immutable row-major boolean raster"""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            values = np.unique(arr)
            if not np.isin(values, (0, 1)).all():
                raise ValueError(f"mask values must be binary, got {values[:8].tolist()}")
        arr = np.array(arr, dtype=np.bool_, copy=True)
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.bool_))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=np.bool_))

    @classmethod
    def from_box(cls, box: BoundingBox, width: int, height: int) -> "BinaryMask":
        bits = np.zeros((height, width), dtype=np.bool_)
        clamped = box.clamp(width, height)
        if clamped is not None:
            x0, y0 = int(np.floor(clamped.x_min)), int(np.floor(clamped.y_min))
            x1, y1 = int(np.ceil(clamped.x_max)), int(np.ceil(clamped.y_max))
            bits[y0:y1, x0:x1] = True
        return cls(bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def width(self) -> int:
        return int(self._bits.shape[1])

    @property
    def height(self) -> int:
        return int(self._bits.shape[0])

    @property
    def shape(self):
        return self._bits.shape

    @property
    def area(self) -> int:
        return int(self._bits.sum())

    def is_empty(self) -> bool:
        return not self._bits.any()

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self._bits)

    def __and__(self, other: "BinaryMask") -> "BinaryMask":
        _check_dims(self, other)
        return BinaryMask(self._bits & other._bits)

    def __or__(self, other: "BinaryMask") -> "BinaryMask":
        _check_dims(self, other)
        return BinaryMask(self._bits | other._bits)

    def __sub__(self, other: "BinaryMask") -> "BinaryMask":
        _check_dims(self, other)
        return BinaryMask(self._bits & ~other._bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self):
        return hash((self.shape, self._bits.tobytes()))

    def __repr__(self):
        return f"<BinaryMask({self.width}x{self.height}, area={self.area})>"

    def touches_border(self) -> bool:
        b = self._bits
        if b.size == 0:
            return False
        return bool(b[0, :].any() or b[-1, :].any() or b[:, 0].any() or b[:, -1].any())

    def to_uint8(self) -> np.ndarray:
        return self._bits.astype(np.uint8) * 255


def _check_dims(a: BinaryMask, b: BinaryMask):
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def source_indices(t: AffineTransform, width: int, height: int):
    """
    Source pixel index for every output pixel under the inverse map.

    The center of output pixel p is mapped through t^-1 and the source pixel
    containing that point is taken. Returns (src_x, src_y, valid) arrays of
    shape (height, width).
    """
    if abs(t.determinant) < SINGULAR_EPS:
        raise SingularTransform(f"cannot warp with singular transform (det={t.determinant:.3e})")
    inv = t.inverse()
    cx = np.arange(width, dtype=np.float64) + 0.5
    cy = np.arange(height, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(cx, cy)
    ux = inv.a11 * gx + inv.a12 * gy + inv.a13
    uy = inv.a21 * gx + inv.a22 * gy + inv.a23
    sx = np.floor(ux)
    sy = np.floor(uy)
    valid = (sx >= 0) & (sx < width) & (sy >= 0) & (sy < height)
    sx = np.where(valid, sx, 0).astype(np.intp)
    sy = np.where(valid, sy, 0).astype(np.intp)
    return sx, sy, valid


def warp_raster(array: np.ndarray, t: AffineTransform) -> np.ndarray:
    """Warp an HxW or HxWxC raster; pixels mapping outside the source become zero"""
    arr = np.asarray(array)
    height, width = arr.shape[:2]
    sx, sy, valid = source_indices(t, width, height)
    out = arr[sy, sx]
    if arr.ndim == 3:
        out = np.where(valid[..., None], out, np.zeros_like(out))
    else:
        out = np.where(valid, out, np.zeros_like(out))
    return out


def warp_mask(m: BinaryMask, t: AffineTransform) -> BinaryMask:
    return BinaryMask(warp_raster(m.bits, t))


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    _check_dims(a, b)
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return inter / union


def bbox_of_mask(m: BinaryMask) -> BoundingBox:
    if m.is_empty():
        raise EmptyMask("cannot take the bounding box of an empty mask")
    rows = np.flatnonzero(m.bits.any(axis=1))
    cols = np.flatnonzero(m.bits.any(axis=0))
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


# Serialization: single-channel 8-bit, 0 background, 255 foreground

def mask_from_array(arr: np.ndarray, source: str = "<array>") -> BinaryMask:
    values = np.unique(arr)
    if not np.isin(values, (0, 255)).all():
        raise InvalidMaskFile(f"{source}: mask values must be 0 or 255, found {values[:8].tolist()}")
    return BinaryMask(arr == 255)


def _image_to_mask(img: Image.Image, source: str) -> BinaryMask:
    if img.mode not in ("L", "1", "P"):
        raise InvalidMaskFile(f"{source}: expected a single-channel image, got mode {img.mode}")
    if img.mode == "1":
        img = img.convert("L")
    return mask_from_array(np.asarray(img), source)


def load_mask(path: Union[str, Path]) -> BinaryMask:
    with Image.open(path) as img:
        img.load()
        return _image_to_mask(img, str(path))


def save_mask(mask: BinaryMask, path: Union[str, Path]):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.to_uint8()).save(path, format="PNG")


def mask_to_png_bytes(mask: BinaryMask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(mask.to_uint8()).save(buf, format="PNG")
    return buf.getvalue()


def mask_to_b64(mask: BinaryMask) -> str:
    return base64.b64encode(mask_to_png_bytes(mask)).decode("ascii")


def mask_from_b64(data: str) -> BinaryMask:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            img.load()
            return _image_to_mask(img, "<base64>")
    except InvalidMaskFile:
        raise
    except Exception as e:
        raise InvalidMaskFile(f"<base64>: cannot decode mask: {e}") from e


# RGB rasters travel the same way

def image_to_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def image_from_b64(data: str) -> np.ndarray:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def load_image(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def save_image(pixels: np.ndarray, path: Union[str, Path]):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path, format="PNG")
