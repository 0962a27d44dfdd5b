"""
Prompt builder and model reply parser tests
"""
import json
from pathlib import Path

import numpy as np
import pytest

from backend.exceptions import (
    BadBottomRow,
    EmptyInstruction,
    MalformedReply,
    MissingDescriptions,
    MissingIdTokens,
    MissingMatrixTokens,
    NoCandidateObjects,
    NonFiniteCoefficient,
    ReplyParseError,
    WrongNumberCount,
)
from backend.geometry import AffineTransform, BoundingBox, Point
from backend.llmproto import (
    ID_END,
    ID_START,
    MATRIX_END,
    MATRIX_START,
    SENTINELS,
    Detection,
    SceneDescriptions,
    build_grounding_prompt,
    build_reasoner_prompt,
    format_box,
    parse_grounding_reply,
    parse_reasoner_reply,
    render_grounding_reply,
    render_reasoner_reply,
    template_hash,
)
from backend.llmproto.grounding import DESCRIPTION_FIELDS, extract_json_object
from backend.llmproto.prompts import TEMPLATE_DIR

REPLY_DIR = Path(__file__).parent / "fixtures" / "replies"
REPLY_FIXTURES = sorted(REPLY_DIR.glob("*.txt"))

SCENE = SceneDescriptions(
    scene="A cat sits on a wooden table next to a bottle.",
    relationships="The bottle is to the right of the cat.",
    background_prompt="An empty wooden table.",
    generation_prompt="A cat on a table, further to the left.",
)

PROSE_WORDS = ("the", "cat", "bottle", "object", "moves", "left", "by", "pixels", "matrix", "scale", "id", "so", "a13")


def random_prose(rng: np.random.Generator) -> str:
    """Distractor text with numbers, bracketed matrices and stray brackets but no sentinel tokens"""
    pieces = []
    for _ in range(int(rng.integers(0, 30))):
        kind = rng.integers(0, 5)
        if kind == 0:
            pieces.append(str(rng.choice(PROSE_WORDS)))
        elif kind == 1:
            pieces.append(f"{rng.uniform(-1e4, 1e4):.{int(rng.integers(0, 6))}f}")
        elif kind == 2:
            rows = rng.integers(-500, 500, size=(int(rng.integers(1, 4)), 3))
            pieces.append("[" + ", ".join("[" + ", ".join(str(v) for v in row) + "]" for row in rows) + "]")
        elif kind == 3:
            pieces.append(str(rng.choice(["[", "]", "],", "[[", "]]"])))
        else:
            pieces.append(str(rng.choice([".", ",", ";", "\n", "(id 7)", "e5", "-"])))
    return " ".join(pieces) + "\n"


def grounding_payload(**overrides):
    payload = {
        "objects": [
            {"object_id": 0, "class_label": "cat", "bbox": [10, 20, 60, 80], "point": [35, 50]},
            {"object_id": 1, "class_label": "bottle", "bbox": [70, 10, 90, 70], "point": [80, 40]},
        ],
        "scene": SCENE.scene,
        "relationships": SCENE.relationships,
        "background_prompt": SCENE.background_prompt,
        "generation_prompt": SCENE.generation_prompt,
    }
    payload.update(overrides)
    return payload


# Prompts


def test_grounding_prompt_is_the_template_with_the_instruction():
    template = (TEMPLATE_DIR / "grounding_v1.txt").read_text(encoding="utf-8")
    prompt = build_grounding_prompt("  Move the cat left by 150px \n")
    assert prompt == template.replace("$instruction", "Move the cat left by 150px")
    assert "$" not in prompt
    for name in DESCRIPTION_FIELDS:
        assert prompt.count(name) == 1, name


def test_prompt_builders_reject_empty_input():
    with pytest.raises(EmptyInstruction):
        build_grounding_prompt("   ")
    with pytest.raises(NoCandidateObjects):
        build_reasoner_prompt("move the cat left by 5px", SCENE, [])
    with pytest.raises(EmptyInstruction):
        build_reasoner_prompt("", SCENE, [(0, BoundingBox(0, 0, 4, 4), "cat")])


def test_reasoner_prompt_lists_every_candidate():
    candidates = [(0, BoundingBox(10, 20, 60, 80), "cat"), (7, BoundingBox(70.5, 10, 90, 70), "bottle")]
    prompt = build_reasoner_prompt("Move the cat left by 150px", SCENE, candidates)
    assert "0, cat, [10, 20, 60, 80]" in prompt
    assert "7, bottle, [70.5, 10, 90, 70]" in prompt
    assert SCENE.scene in prompt
    assert SCENE.relationships in prompt
    assert "Move the cat left by 150px" in prompt
    assert prompt.index("0, cat") < prompt.index("7, bottle")
    for token in SENTINELS:
        assert token in prompt


def test_format_box_and_template_hash():
    assert format_box(BoundingBox(1, 2.25, 3, 4)) == "[1, 2.25, 3, 4]"
    digest = template_hash()
    assert len(digest) == 64 and digest == template_hash("v1")
    with pytest.raises(FileNotFoundError):
        template_hash("v0")


# Grounding replies


def test_grounding_reply_inside_prose_and_fences():
    text = "Sure, here are the objects.\n```json\n" + json.dumps(grounding_payload()) + "\n```\nAnything else?"
    reply = parse_grounding_reply(text)
    assert [d.object_id for d in reply.detections] == [0, 1]
    assert reply.detections[0].bbox == BoundingBox(10, 20, 60, 80)
    assert reply.detections[1].class_label == "bottle"
    assert reply.scene == SCENE
    assert reply.warnings == []


def test_grounding_duplicate_ids_keep_the_first():
    objects = grounding_payload()["objects"] + [
        {"object_id": 0, "class_label": "dog", "bbox": [0, 0, 5, 5], "point": [1, 1]}
    ]
    reply = parse_grounding_reply(json.dumps(grounding_payload(objects=objects)))
    assert [d.class_label for d in reply.detections] == ["cat", "bottle"]
    assert any("duplicate" in w for w in reply.warnings)


def test_grounding_boxes_are_clamped_to_the_image():
    objects = [
        {"object_id": 0, "class_label": "cat", "bbox": [-10, 20, 60, 130], "point": [-3, 50]},
        {"object_id": 1, "class_label": "kite", "bbox": [150, 10, 190, 30], "point": [160, 20]},
    ]
    reply = parse_grounding_reply(json.dumps(grounding_payload(objects=objects)), image_size=(100, 100))
    assert len(reply.detections) == 1
    det = reply.detections[0]
    assert det.bbox == BoundingBox(0, 20, 60, 100)
    assert det.point == Point(0, 50)
    # clamped box, moved point, clamped kite box, dropped kite
    assert len(reply.warnings) == 4


def test_grounding_reply_errors():
    with pytest.raises(MalformedReply):
        parse_grounding_reply("I could not find any objects.")
    with pytest.raises(MalformedReply):
        parse_grounding_reply('{"objects": [{"object_id": "a"}]}')
    with pytest.raises(MissingDescriptions) as info:
        parse_grounding_reply(json.dumps(grounding_payload(relationships="  ", generation_prompt=None)))
    assert "relationships" in str(info.value) and "generation_prompt" in str(info.value)
    assert info.value.constraint == "descriptions"


def test_rendered_grounding_reply_parses_back():
    detections = [
        Detection(BoundingBox(1, 2, 30, 40), Point(5, 6), "cat", 3),
        Detection(BoundingBox(50, 60, 70.5, 80), Point(60, 70), "potted plant", 9),
    ]
    reply = parse_grounding_reply(render_grounding_reply(detections, SCENE))
    assert reply.detections == detections
    assert reply.scene == SCENE


def test_trailing_braces_after_the_json_are_ignored():
    body = json.dumps(grounding_payload())
    reply = parse_grounding_reply("Result {draft}: " + body + "\nDone {ok}.")
    assert [d.object_id for d in reply.detections] == [0, 1]
    assert extract_json_object("a {b} c " + body + " {d}") == body


def test_reply_fixtures_are_shipped():
    kinds = {json.loads(p.with_suffix(".expected.json").read_text(encoding="utf-8"))["kind"] for p in REPLY_FIXTURES}
    assert kinds == {"grounding", "reasoner"}


@pytest.mark.parametrize("path", REPLY_FIXTURES, ids=lambda p: p.stem)
def test_reply_fixtures_parse_to_their_recorded_values(path):
    text = path.read_text(encoding="utf-8")
    expected = json.loads(path.with_suffix(".expected.json").read_text(encoding="utf-8"))
    if expected["kind"] == "reasoner":
        reply = parse_reasoner_reply(text)
        assert reply.target_id == expected["target_id"]
        assert reply.transform.coefficients() == tuple(float(v) for v in expected["transform"])
        assert reply.warnings == []
        return

    reply = parse_grounding_reply(text, image_size=tuple(expected["image_size"]))
    assert reply.detections == [
        Detection(BoundingBox(*d["bbox"]), Point(*d["point"]), d["class_label"], d["object_id"])
        for d in expected["detections"]
    ]
    assert reply.scene == SceneDescriptions(**expected["scene"])
    # Nothing in a well-formed reply is repaired or dropped
    assert reply.warnings == []
    assert len(reply.detections) == len(json.loads(extract_json_object(text))["objects"])


# Reasoner replies


def random_transform(rng: np.random.Generator) -> AffineTransform:
    linear = rng.uniform(-3, 3, size=4)
    offset = rng.uniform(-500, 500, size=2)
    return AffineTransform(linear[0], linear[1], offset[0], linear[2], linear[3], offset[1])


def test_reasoner_reply_round_trip_with_distracting_prose():
    rng = np.random.default_rng(2024)
    styles = ("nested", "flat", "affine")
    for i in range(1000):
        t = random_transform(rng)
        object_id = int(rng.integers(0, 10_000))
        text = render_reasoner_reply(t, object_id, prose=random_prose(rng), style=styles[i % 3]) + random_prose(rng)
        reply = parse_reasoner_reply(text)
        assert reply.target_id == object_id
        assert reply.transform.almost_equal(t, tol=1e-9)
        assert reply.warnings == []


def test_reasoner_reply_examples():
    reply = parse_reasoner_reply("<MSTART>[[1, 0, -150], [0, 1, 0], [0, 0, 1]]<MEND> <ISTART>2<IEND>")
    assert reply.target_id == 2
    assert reply.transform == AffineTransform.translation(-150, 0)
    reply = parse_reasoner_reply(b"ok <ISTART> 4 <IEND> then <MSTART>0.5 0 10\n0 0.5 20<MEND>")
    assert reply.target_id == 4
    assert reply.transform == AffineTransform(0.5, 0, 10, 0, 0.5, 20)


def test_reasoner_reply_uses_the_first_matrix_block():
    first = render_reasoner_reply(AffineTransform.translation(3, 4), 1)
    text = first + " wait, actually <MSTART>[[2, 0, 0], [0, 2, 0], [0, 0, 1]]<MEND>"
    reply = parse_reasoner_reply(text)
    assert reply.transform == AffineTransform.translation(3, 4)
    assert len(reply.warnings) == 1


@pytest.mark.parametrize(
    "text, error",
    [
        ("no tokens at all", MissingMatrixTokens),
        ("<MSTART>[[1, 0, 0], [0, 1, 0], [0, 0, 1]] <ISTART>1<IEND>", MissingMatrixTokens),
        ("<MSTART>[[1, 0, 0], [0, 1, 0], [0, 0, 1]]<MEND>", MissingIdTokens),
        ("<MSTART>[[1, 0, 0], [0, 1, 0], [0, 0, 1]]<MEND><ISTART>two<IEND>", MissingIdTokens),
        ("<MSTART>[[1, 0, 0], [0, 1, 0], [0, 0, 1]]<MEND><ISTART>-1<IEND>", MissingIdTokens),
        ("<MSTART>[[1, 0, 0], [0, 1, 0]], 5<MEND><ISTART>1<IEND>", WrongNumberCount),
        ("<MSTART>[[1, 0, 0], [0, 1, 0], [0, 1, 1]]<MEND><ISTART>1<IEND>", BadBottomRow),
        ("<MSTART>[[1e999, 0, 0], [0, 1, 0], [0, 0, 1]]<MEND><ISTART>1<IEND>", NonFiniteCoefficient),
    ],
)
def test_reasoner_reply_errors(text, error):
    with pytest.raises(error):
        parse_reasoner_reply(text)


def test_random_bytes_only_raise_reply_parse_errors():
    rng = np.random.default_rng(99)
    alphabet = list(SENTINELS) + ["[", "]", ",", " ", "-", ".", "e", "1", "0", "9", "nan", "\n", "x"]
    for _ in range(2000):
        if rng.random() < 0.5:
            data = rng.integers(0, 256, size=int(rng.integers(0, 200)), dtype=np.uint8).tobytes()
        else:
            pieces = rng.choice(alphabet, size=int(rng.integers(0, 40)))
            data = "".join(pieces).encode("utf-8")
        try:
            reply = parse_reasoner_reply(data)
            assert reply.target_id >= 0
            assert reply.transform.is_finite()
        except ReplyParseError:
            pass
        try:
            parse_grounding_reply(data)
        except ReplyParseError:
            pass


def test_sentinels_are_distinct_tokens():
    assert len(set(SENTINELS)) == 4
    assert (MATRIX_START, MATRIX_END, ID_START, ID_END) == SENTINELS
