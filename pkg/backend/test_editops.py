"""
Edit operation tests: compiler anchors, sequence composition, instruction grammar, template bank
"""
import numpy as np
import pytest

from backend.dataset.templates import FORMS_PER_KIND, render_template
from backend.editops import (
    EditCategory,
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
    label_key,
    label_mentioned,
    normalize_instruction,
    op_from_dict,
    op_to_dict,
    parse_instruction,
    parse_target,
)
from backend.exceptions import DegenerateScale, InvalidEditOp, UnparsableInstruction, ZeroSizeObject
from backend.geometry import AffineTransform, BinaryMask, BoundingBox, bbox_of_mask, compose, warp_mask


def geometry(box, width=200, height=160) -> ObjectGeometry:
    return ObjectGeometry(BoundingBox(*box), width, height)


# Compiler


def test_move_zero_is_identity():
    assert compile_op(Move(0, 0), geometry((10, 10, 60, 40))) == AffineTransform.identity()


def test_scale_to_width_factor_follows_object_width():
    t = compile_op(ScaleToWidth(100), geometry((10, 10, 60, 40)))
    assert (t.a11, t.a22) == (2.0, 2.0)
    t = compile_op(ScaleToWidth(100), geometry((10, 10, 35, 40)))
    assert (t.a11, t.a22) == (4.0, 4.0)
    t = compile_op(ScaleToWidth(100, uniform=False), geometry((10, 10, 60, 40)))
    assert (t.a11, t.a22) == (2.0, 1.0)
    t = compile_op(ScaleToHeight(15), geometry((10, 10, 60, 40)))
    assert t.a22 == pytest.approx(0.5)


def test_scale_keeps_the_bbox_center_fixed():
    geom = geometry((50, 40, 100, 80))
    for op in (ScaleBy(1.7, 0.6), Rotate(37), Shear(0.3, -0.2), FlipHorizontal(), FlipVertical(), ScaleToHeight(20)):
        x, y = compile_op(op, geom).apply(75, 60)
        assert x == pytest.approx(75.0, abs=1e-9)
        assert y == pytest.approx(60.0, abs=1e-9)


def test_move_is_screen_coordinates():
    t = compile_op(parse_instruction("move the cat left by 150px"), geometry((160, 10, 190, 40)))
    assert t.apply(0, 0) == (-150.0, 0.0)
    t = compile_op(parse_instruction("move the cat up by 5px"), geometry((160, 10, 190, 40)))
    assert t.apply(0, 0) == (0.0, -5.0)


def test_size_preserving_ops_have_unit_determinant():
    geom = geometry((20, 30, 90, 100))
    rng = np.random.default_rng(4)
    ops = [Move(13, -7), FlipHorizontal(), FlipVertical()] + [Rotate(float(d)) for d in rng.uniform(-180, 180, 20)]
    for op in ops:
        assert abs(compile_op(op, geom).determinant) == pytest.approx(1.0, abs=1e-12)


def test_sequence_steps_see_updated_geometry():
    geom = geometry((40, 40, 60, 60), 200, 200)
    seq = Sequence((ScaleBy(2, 2), Move(10, 5), ScaleToWidth(20)))
    t = compile_op(seq, geom)
    # scale -> (30, 30, 70, 70), move -> (40, 35, 80, 75), halve about (60, 55)
    assert t.map_box(geom.bbox).as_tuple() == pytest.approx((50.0, 45.0, 70.0, 65.0))


def test_sequence_equals_stepwise_composition():
    geom = geometry((30, 30, 70, 90), 200, 200)
    ops = (Rotate(20), ScaleBy(1.2, 0.9), Move(-4, 11))
    step_box = geom.bbox
    total = AffineTransform.identity()
    for op in ops:
        step = compile_op(op, ObjectGeometry(step_box, 200, 200))
        total = compose(step, total)
        step_box = step.map_box(step_box)
    assert compile_op(Sequence(ops), geom).almost_equal(total, tol=1e-9)


def test_scale_to_width_lands_within_a_pixel_after_warping():
    mask = BinaryMask.from_box(BoundingBox(50, 40, 100, 80), 200, 160)
    geom = geometry((50, 40, 100, 80))
    for target in (20, 37, 64, 80, 99):
        warped = warp_mask(mask, compile_op(ScaleToWidth(target), geom))
        assert abs(bbox_of_mask(warped).width - target) <= 1


def test_degenerate_and_zero_size_objects():
    with pytest.raises(DegenerateScale):
        compile_op(Shear(1.0, 1.0), geometry((10, 10, 60, 40)))
    with pytest.raises(DegenerateScale):
        compile_op(ScaleToWidth(1e-14), geometry((10, 10, 60, 40)))
    with pytest.raises(ZeroSizeObject):
        compile_op(ScaleToWidth(10), ObjectGeometry(BoundingBox(5, 5, 5 + 1e-12, 9), 20, 20))
    with pytest.raises(ValueError):
        compile_op(Move(1, 1), geometry((150, 10, 210, 40)))


def test_invalid_ops_are_rejected_on_construction():
    with pytest.raises(InvalidEditOp):
        ScaleBy(0, 1)
    with pytest.raises(InvalidEditOp):
        ScaleToWidth(-3)
    with pytest.raises(InvalidEditOp):
        Rotate(float("nan"))
    with pytest.raises(InvalidEditOp):
        Sequence(())


def test_categorize():
    assert categorize(Move(1, 0)) is EditCategory.MOVE
    assert categorize(ScaleToHeight(4)) is EditCategory.SCALE
    assert categorize(FlipVertical()) is EditCategory.FLIP
    assert categorize(Shear(0.1, 0)) is EditCategory.SHEAR
    assert categorize(Rotate(10)) is EditCategory.ROTATE
    assert categorize(Sequence((Move(1, 0), Rotate(3)))) is EditCategory.MIX
    # Reason is assigned by the generator, never inferred from the op
    assert categorize(Sequence((Move(1, 0),))) is EditCategory.MIX


def test_op_dict_round_trip():
    ops = [
        Move(-3.5, 2),
        ScaleBy(0.5, 2),
        ScaleToWidth(40, uniform=False),
        ScaleToHeight(12),
        Rotate(-90),
        FlipHorizontal(),
        FlipVertical(),
        Shear(0.2, 0),
        Sequence((ScaleBy(2, 2), Move(-150, 0))),
    ]
    for op in ops:
        assert op_from_dict(op_to_dict(op)) == op
    with pytest.raises(InvalidEditOp):
        op_from_dict({"kind": "teleport"})
    with pytest.raises(InvalidEditOp):
        op_from_dict({"kind": "move", "dx": 1})


# Instruction grammar


def test_parser_examples():
    assert parse_instruction("move the cat left by 150px") == Move(-150, 0)
    assert parse_instruction("Scale the bus by 0.56.") == ScaleBy(0.56, 0.56)
    assert parse_instruction("scale the orange by 2 and move it left by 150px") == Sequence(
        (ScaleBy(2, 2), Move(-150, 0))
    )
    assert parse_instruction("Move the dog 20px right, 10px down") == Move(20, 10)
    assert parse_instruction("rotate the chair by 45 degrees clockwise") == Rotate(-45)
    assert parse_instruction("rotate the chair counterclockwise by 30°") == Rotate(30)
    assert parse_instruction("resize the horse to 50%") == ScaleBy(0.5, 0.5)
    assert parse_instruction("make the sofa 120px wide") == ScaleToWidth(120)
    assert parse_instruction("scale the sofa only vertically to 40 pixels") == ScaleToHeight(40, uniform=False)
    assert parse_instruction("flip the bird upside down") == FlipVertical()
    assert parse_instruction("shear the bottle by (0.2, -0.1)") == Shear(0.2, -0.1)


def test_normalize_instruction():
    assert normalize_instruction("  Move   the Cat ,  10px left .") == "move the cat, 10px left"
    assert normalize_instruction("shear it by ( 0.1 ,0.2 )") == "shear it by (0.1, 0.2)"


def test_unparsable_instruction_reports_the_clause():
    text = "scale the cat by 2 and paint it blue"
    with pytest.raises(UnparsableInstruction) as info:
        parse_instruction(text)
    assert info.value.span == (len("scale the cat by 2 and "), len(text))
    assert info.value.offending == "paint it blue"
    with pytest.raises(UnparsableInstruction):
        parse_instruction("   ")
    with pytest.raises(UnparsableInstruction):
        parse_instruction("scale the cat by 0")


def test_parse_target_and_labels():
    assert parse_target("Move the potted plant left by 3px") == "potted plant"
    assert parse_target("move it left by 3px") is None
    assert parse_target("paint the cat blue") is None
    assert label_key("Potted plant") == label_key("pottedplant") == label_key("potted-plant")
    assert label_mentioned("pottedplant", "move the potted plant up")
    assert label_mentioned("cat", "Rotate the CAT 10°")
    assert not label_mentioned("cat", "move the caterpillar")


def test_template_bank_parses_back_to_its_op():
    ops = [
        Move(-150, 0),
        Move(0, 0),
        Move(12.5, -3),
        Move(0, 40),
        ScaleBy(0.56, 0.56),
        ScaleBy(1.5, 1),
        ScaleBy(1, 0.75),
        ScaleBy(1.25, 0.8),
        ScaleToWidth(100),
        ScaleToWidth(64, uniform=False),
        ScaleToHeight(33),
        ScaleToHeight(48.5, uniform=False),
        Rotate(30),
        Rotate(-12.5),
        Rotate(0),
        FlipHorizontal(),
        FlipVertical(),
        Shear(0.3, 0),
        Shear(0, -0.25),
        Shear(0.1, 0.2),
        Sequence((ScaleBy(2, 2), Move(-150, 0))),
        Sequence((Rotate(-15), FlipHorizontal(), ScaleToWidth(80))),
    ]
    for label in ("cat", "pottedplant", "diningtable", "tvmonitor"):
        for op in ops:
            for form in range(FORMS_PER_KIND):
                text = render_template(op, label, form)
                assert parse_instruction(text) == op, text
                assert label_mentioned(label, text)
