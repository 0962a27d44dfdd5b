"""
Geometry tests: affine algebra, mask warping against a per-pixel oracle, IoU
"""
import math

import numpy as np
import pytest

from backend.exceptions import DimensionMismatch, EmptyMask, InvalidMaskFile, SingularTransform
from backend.geometry import (
    AffineTransform,
    BinaryMask,
    BoundingBox,
    Point,
    about_anchor,
    bbox_iou,
    bbox_of_mask,
    compose,
    load_mask,
    mask_from_b64,
    mask_iou,
    mask_to_b64,
    save_mask,
    warp_mask,
    warp_raster,
)


def brute_force_warp(bits: np.ndarray, t: AffineTransform) -> np.ndarray:
    """Per-output-pixel inverse map, written independently of the vectorized warp"""
    height, width = bits.shape
    inv = t.inverse()
    out = np.zeros_like(bits)
    for py in range(height):
        for px in range(width):
            ux, uy = inv.apply(px + 0.5, py + 0.5)
            sx, sy = math.floor(ux), math.floor(uy)
            if 0 <= sx < width and 0 <= sy < height:
                out[py, px] = bits[sy, sx]
    return out


def random_invertible(rng: np.random.Generator, width: int, height: int) -> AffineTransform:
    while True:
        a11, a12, a21, a22 = rng.uniform(-2.0, 2.0, size=4)
        if abs(a11 * a22 - a12 * a21) > 1e-3:
            break
    a13 = rng.uniform(-width, width)
    a23 = rng.uniform(-height, height)
    return AffineTransform(a11, a12, a13, a21, a22, a23)


def disc(width: int, height: int, cx: float, cy: float, r: float) -> BinaryMask:
    yy, xx = np.mgrid[0:height, 0:width]
    return BinaryMask((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= r * r)


def test_warp_matches_per_pixel_oracle():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        width, height = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        bits = rng.random((height, width)) < 0.4
        t = random_invertible(rng, width, height)
        assert np.array_equal(warp_mask(BinaryMask(bits), t).bits, brute_force_warp(bits, t))


def test_identity_warp_is_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = BinaryMask(rng.random((33, 47)) < 0.5)
        assert warp_mask(m, AffineTransform.identity()) == m


def test_integer_translations_compose_exactly():
    m = BinaryMask.from_box(BoundingBox(20, 20, 30, 35), 80, 80)
    a, b = AffineTransform.translation(7, -3), AffineTransform.translation(-2, 11)
    twice = warp_mask(warp_mask(m, a), b)
    once = warp_mask(m, AffineTransform.translation(5, 8))
    assert twice == once
    assert bbox_of_mask(once) == BoundingBox(25, 28, 35, 43)


def test_full_displacement_leaves_no_overlap():
    m = BinaryMask.from_box(BoundingBox(10, 10, 20, 20), 64, 64)
    moved = warp_mask(m, AffineTransform.translation(10, 0))
    assert mask_iou(m, moved) == 0.0
    assert moved.area == m.area


def test_flips_about_the_image_center_are_involutions():
    rng = np.random.default_rng(3)
    m = BinaryMask(rng.random((20, 31)) < 0.3)
    flip_h = about_anchor(AffineTransform.scaling(-1, 1), Point(31 / 2, 20 / 2))
    flip_v = about_anchor(AffineTransform.scaling(1, -1), Point(31 / 2, 20 / 2))
    assert warp_mask(warp_mask(m, flip_h), flip_h) == m
    assert warp_mask(warp_mask(m, flip_v), flip_v) == m
    assert np.array_equal(warp_mask(m, flip_h).bits, m.bits[:, ::-1])


def test_approximate_composition_under_discretization():
    rng = np.random.default_rng(11)
    m = disc(160, 160, 80, 80, 50)
    center = Point(80, 80)
    for _ in range(20):
        steps = []
        for _ in range(2):
            s = rng.uniform(0.9, 1.1)
            t = compose(AffineTransform.rotation(rng.uniform(-30, 30)), AffineTransform.scaling(s, s))
            t = compose(AffineTransform.translation(*rng.uniform(-5, 5, size=2)), t)
            steps.append(about_anchor(t, center))
        t1, t2 = steps
        two_step = warp_mask(warp_mask(m, t1), t2)
        one_step = warp_mask(m, compose(t2, t1))
        assert mask_iou(two_step, one_step) >= 0.95


def test_compose_examples():
    t = AffineTransform(1.5, 0.2, 3.0, -0.1, 0.8, 4.0)
    assert compose(AffineTransform.identity(), t) == t
    back = compose(AffineTransform.translation(10, 0), AffineTransform.translation(-10, 0))
    assert back.almost_equal(AffineTransform.identity())
    scaled = compose(AffineTransform.scaling(2), AffineTransform.translation(5, 0))
    assert scaled.apply(1, 0) == (12.0, 0.0)


def test_about_anchor_examples():
    anchor = Point(50, 50)
    assert about_anchor(AffineTransform.identity(), Point(3, 9)).almost_equal(AffineTransform.identity())
    assert about_anchor(AffineTransform.scaling(2), anchor).apply(50, 50) == (50.0, 50.0)
    x, y = about_anchor(AffineTransform.rotation(90), Point(10, 10)).apply(20, 10)
    assert x == pytest.approx(10.0, abs=1e-12)
    assert y == pytest.approx(20.0, abs=1e-12)


def test_inverse_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(100):
        t = random_invertible(rng, 50, 50)
        assert compose(t, t.inverse()).almost_equal(AffineTransform.identity(), tol=1e-6)


def test_singular_transform_is_rejected():
    m = BinaryMask.full(4, 4)
    with pytest.raises(SingularTransform):
        warp_mask(m, AffineTransform(1, 2, 0, 2, 4, 0))
    with pytest.raises(SingularTransform):
        AffineTransform.scaling(0, 1).inverse()


def test_from_matrix_checks_bottom_row():
    t = AffineTransform.from_matrix([[1, 0, 5], [0, 1, -2], [0, 0, 1]])
    assert t.coefficients() == (1.0, 0.0, 5.0, 0.0, 1.0, -2.0)
    with pytest.raises(ValueError):
        AffineTransform.from_matrix([[1, 0, 5], [0, 1, -2], [0, 1, 1]])


def test_mask_iou_examples():
    rng = np.random.default_rng(0)
    m = BinaryMask(rng.random((10, 12)) < 0.5)
    assert mask_iou(m, m) == 1.0
    assert mask_iou(m, m.complement()) == 0.0
    left = BinaryMask.from_box(BoundingBox(0, 0, 6, 10), 12, 10)
    assert mask_iou(left, BinaryMask.full(12, 10)) == 0.5
    assert mask_iou(BinaryMask.empty(5, 5), BinaryMask.empty(5, 5)) == 1.0
    assert mask_iou(BinaryMask.empty(5, 5), BinaryMask.full(5, 5)) == 0.0
    with pytest.raises(DimensionMismatch):
        mask_iou(BinaryMask.empty(5, 5), BinaryMask.empty(5, 6))


def test_mask_iou_is_symmetric_and_bounded():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a = BinaryMask(rng.random((16, 16)) < 0.3)
        b = BinaryMask(rng.random((16, 16)) < 0.3)
        assert mask_iou(a, b) == mask_iou(b, a)
        assert 0.0 <= mask_iou(a, b) <= 1.0


def test_bbox_iou_examples():
    b = BoundingBox(0, 0, 10, 10)
    assert bbox_iou(b, b) == 1.0
    assert bbox_iou(b, BoundingBox(20, 20, 30, 30)) == 0.0
    assert bbox_iou(b, BoundingBox(5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert bbox_iou(BoundingBox.full_image(100, 100), BoundingBox(0, 0, 50, 50)) == 0.25


def test_bbox_of_mask_examples():
    bits = np.zeros((10, 12), dtype=bool)
    bits[7, 3] = True
    assert bbox_of_mask(BinaryMask(bits)) == BoundingBox(3, 7, 4, 8)
    assert bbox_of_mask(BinaryMask.full(12, 10)) == BoundingBox(0, 0, 12, 10)
    bits = np.zeros((10, 12), dtype=bool)
    bits[0, 0] = bits[4, 9] = True
    assert bbox_of_mask(BinaryMask(bits)) == BoundingBox(0, 0, 10, 5)
    with pytest.raises(EmptyMask):
        bbox_of_mask(BinaryMask.empty(3, 3))


def test_touches_border():
    assert BinaryMask.from_box(BoundingBox(0, 3, 4, 6), 12, 10).touches_border()
    assert BinaryMask.from_box(BoundingBox(4, 6, 12, 10), 12, 10).touches_border()
    assert not BinaryMask.from_box(BoundingBox(2, 2, 8, 8), 12, 10).touches_border()
    assert not BinaryMask.empty(12, 10).touches_border()
    for width, height in ((0, 5), (5, 0), (0, 0)):
        assert not BinaryMask.empty(width, height).touches_border()


def test_warp_raster_aligns_with_warp_mask():
    rng = np.random.default_rng(21)
    bits = rng.random((24, 30)) < 0.5
    pixels = rng.integers(0, 256, size=(24, 30, 3), dtype=np.uint8)
    t = about_anchor(AffineTransform.rotation(33), Point(15, 12))
    warped_pixels = warp_raster(pixels, t)
    warped_bits = warp_mask(BinaryMask(bits), t).bits
    expected = warp_raster(np.where(bits[..., None], pixels, 0), t)
    assert np.array_equal(np.where(warped_bits[..., None], warped_pixels, 0), expected)


def test_mask_files_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    m = BinaryMask(rng.random((13, 17)) < 0.5)
    save_mask(m, tmp_path / "m.png")
    assert load_mask(tmp_path / "m.png") == m
    assert mask_from_b64(mask_to_b64(m)) == m


def test_mask_loader_rejects_grey_values(tmp_path):
    from PIL import Image

    Image.fromarray(np.full((4, 4), 128, dtype=np.uint8)).save(tmp_path / "grey.png")
    with pytest.raises(InvalidMaskFile):
        load_mask(tmp_path / "grey.png")
