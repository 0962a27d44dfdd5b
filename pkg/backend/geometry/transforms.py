"""
Affine algebra on the 2x3 pixel-space form of a 3x3 matrix.

Coordinates are continuous image coordinates: pixel (col, row) covers
[col, col+1) x [row, row+1), so its center is (col+0.5, row+0.5), x grows to
the right and y grows downward.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from backend.exceptions import SingularTransform

SINGULAR_EPS = 1e-12


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point coordinates must be finite, got ({self.x}, {self.y})")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, max edges exclusive"""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"Invalid bounding box {self.as_tuple()}")

    @classmethod
    def full_image(cls, width: int, height: int) -> "BoundingBox":
        return cls(0, 0, width, height)

    @classmethod
    def from_points(cls, points: Iterable[Tuple[float, float]]) -> "BoundingBox":
        pts = list(points)
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return cls(min(xs), min(ys), max(xs), max(ys))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def corners(self) -> Tuple[Tuple[float, float], ...]:
        return (
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        )

    def contains(self, point: Point) -> bool:
        return self.x_min <= point.x <= self.x_max and self.y_min <= point.y <= self.y_max

    def clamp(self, width: int, height: int):
        """Clip to the image; None when nothing is left"""
        x0 = min(max(self.x_min, 0), width)
        y0 = min(max(self.y_min, 0), height)
        x1 = min(max(self.x_max, 0), width)
        y1 = min(max(self.y_max, 0), height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)

    def within(self, width: int, height: int) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class AffineTransform:
    """[[a11, a12, a13], [a21, a22, a23], [0, 0, 1]]"""

    a11: float = 1.0
    a12: float = 0.0
    a13: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    a23: float = 0.0

    # Constructors

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineTransform":
        return cls(1.0, 0.0, float(dx), 0.0, 1.0, float(dy))

    @classmethod
    def scaling(cls, sx: float, sy: float = None) -> "AffineTransform":
        if sy is None:
            sy = sx
        return cls(float(sx), 0.0, 0.0, 0.0, float(sy), 0.0)

    @classmethod
    def rotation(cls, degrees: float) -> "AffineTransform":
        """Mathematical convention [[c, -s], [s, c]] applied in raster coordinates"""
        rad = math.radians(degrees)
        c, s = math.cos(rad), math.sin(rad)
        return cls(c, -s, 0.0, s, c, 0.0)

    @classmethod
    def shear(cls, kx: float, ky: float) -> "AffineTransform":
        return cls(1.0, float(kx), 0.0, float(ky), 1.0, 0.0)

    @classmethod
    def from_coefficients(cls, values: Sequence[float]) -> "AffineTransform":
        if len(values) != 6:
            raise ValueError(f"expected 6 coefficients, got {len(values)}")
        return cls(*(float(v) for v in values))

    @classmethod
    def from_matrix(cls, matrix, tol: float = 1e-6) -> "AffineTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape == (2, 3):
            return cls(*m.reshape(-1).tolist())
        if m.shape != (3, 3):
            raise ValueError(f"expected a 2x3 or 3x3 matrix, got shape {m.shape}")
        if not np.allclose(m[2], [0.0, 0.0, 1.0], atol=tol, rtol=0.0):
            raise ValueError(f"bottom row must be (0, 0, 1), got {m[2].tolist()}")
        return cls(*m[:2].reshape(-1).tolist())

    # Views

    @property
    def determinant(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.a11, self.a12, self.a13], [self.a21, self.a22, self.a23], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    def coefficients(self) -> Tuple[float, float, float, float, float, float]:
        return (self.a11, self.a12, self.a13, self.a21, self.a22, self.a23)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.coefficients())

    def is_invertible(self) -> bool:
        return abs(self.determinant) >= SINGULAR_EPS

    def almost_equal(self, other: "AffineTransform", tol: float = 1e-9) -> bool:
        return all(abs(a - b) <= tol for a, b in zip(self.coefficients(), other.coefficients()))

    # Algebra

    def apply(self, x: float, y: float) -> Tuple[float, float]:
        return (
            self.a11 * x + self.a12 * y + self.a13,
            self.a21 * x + self.a22 * y + self.a23,
        )

    def apply_point(self, p: Point) -> Point:
        return Point(*self.apply(p.x, p.y))

    def map_box(self, box: BoundingBox) -> BoundingBox:
        """Axis-aligned hull of the mapped corners"""
        return BoundingBox.from_points(self.apply(x, y) for x, y in box.corners())

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        if abs(det) < SINGULAR_EPS:
            raise SingularTransform(f"transform is singular (det={det:.3e})")
        i11 = self.a22 / det
        i12 = -self.a12 / det
        i21 = -self.a21 / det
        i22 = self.a11 / det
        i13 = -(i11 * self.a13 + i12 * self.a23)
        i23 = -(i21 * self.a13 + i22 * self.a23)
        return AffineTransform(i11, i12, i13, i21, i22, i23)


def compose(second: AffineTransform, first: AffineTransform) -> AffineTransform:
    """Matrix product second @ first: apply `first`, then `second`"""
    return AffineTransform(
        second.a11 * first.a11 + second.a12 * first.a21,
        second.a11 * first.a12 + second.a12 * first.a22,
        second.a11 * first.a13 + second.a12 * first.a23 + second.a13,
        second.a21 * first.a11 + second.a22 * first.a21,
        second.a21 * first.a12 + second.a22 * first.a22,
        second.a21 * first.a13 + second.a22 * first.a23 + second.a23,
    )


def about_anchor(t: AffineTransform, anchor: Point) -> AffineTransform:
    """translate(anchor) . t . translate(-anchor)"""
    return compose(
        AffineTransform.translation(anchor.x, anchor.y),
        compose(t, AffineTransform.translation(-anchor.x, -anchor.y)),
    )


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return float(inter / union)
