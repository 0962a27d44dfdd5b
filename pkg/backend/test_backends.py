"""
Stage backend tests: HTTP clients against the stub server, oracle backends, registry and settings
"""
import asyncio
from dataclasses import replace
from pathlib import Path

import httpx
import numpy as np
import pytest

from backend.config.settings import (
    BackendConfig,
    build_pipeline_settings,
    get_settings_summary,
    load_pipeline_settings,
    validate_settings,
)
from backend.dataset.types import EditSample, SourceInstance, bucket_difficulty
from backend.editops import ObjectGeometry, categorize, compile_op, parse_instruction
from backend.exceptions import (
    BackendError,
    BackendUnreachable,
    ConfigError,
    DimensionMismatch,
    MissingMatrixTokens,
    NoCandidateObjects,
    ObjectNotFound,
    TargetNotFound,
)
from backend.geometry import (
    AffineTransform,
    BinaryMask,
    BoundingBox,
    bbox_of_mask,
    load_image,
    mask_iou,
    save_image,
    warp_mask,
)
from backend.llmproto import SceneDescriptions, render_reasoner_reply
from backend.llmproto.grounding import DESCRIPTION_FIELDS
from backend.main import create_app
from backend.services.drawing_service import DrawnMaskDetector, ReferenceDrawer, RefinerDetector, box_fit_transform
from backend.services.grounding_service import JitterGrounder, OracleGrounder
from backend.services.reasoning_service import CompilerReasoner, HttpReasoner, NoisyReasoner, select_candidate
from backend.services.refinement_service import OracleRefiner, require_object
from backend.services.registry import BackendSet, ground_truth_objects

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
WIDTH, HEIGHT = 200, 160
SCENE = SceneDescriptions("A cat on a table.", "The cat is alone.", "An empty table.", "A cat further right.")

ALL_HTTP = {
    "label": "stub",
    "detector": "refiner",
    "grounder": {"kind": "http"},
    "refiner": {"kind": "http"},
    "reasoner": {"kind": "http"},
    "drawer": {"kind": "http"},
}


def make_sample(tmp_path, instruction="Move the cat right by 12px", box=(50, 40, 130, 120), label="cat") -> EditSample:
    pixels = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    pixels[..., 2] = 90
    mask = BinaryMask.from_box(BoundingBox(*box), WIDTH, HEIGHT)
    pixels[mask.bits] = (200, 120, 40)
    image_path = tmp_path / "image.png"
    save_image(pixels, image_path)
    inst = SourceInstance(
        image_ref="image",
        image_path=image_path,
        class_label=label,
        gt_mask=mask,
        gt_bbox=BoundingBox(*box),
        image_width=WIDTH,
        image_height=HEIGHT,
        instance_id=3,
    )
    op = parse_instruction(instruction)
    transform = compile_op(op, ObjectGeometry(inst.gt_bbox, WIDTH, HEIGHT))
    after = warp_mask(mask, transform)
    return EditSample(
        sample_id="image_3_t0_p0",
        instance=inst,
        instruction_text=instruction,
        canonical_op=op,
        gt_transform=transform,
        gt_mask_after=after,
        category=categorize(op),
        difficulty=bucket_difficulty(mask_iou(mask, after)),
        seed=11,
    )


def image_of(sample: EditSample) -> np.ndarray:
    return load_image(sample.instance.image_path)


# HTTP backends against the stub server


def test_http_stages_against_the_stub_server(tmp_path):
    sample = make_sample(tmp_path)
    app = create_app()
    settings = build_pipeline_settings(ALL_HTTP, environ={})
    backends = BackendSet(settings, transport=httpx.ASGITransport(app=app)).bind(sample)
    image = image_of(sample)

    async def run():
        detections, scene = await backends.grounder.ground(image, sample.instruction_text)
        refined = await backends.refiner.refine(image, detections)
        candidates = [(d.object_id, refined[d.object_id].bbox, d.class_label) for d in detections]
        reply = await backends.reasoner.reason(sample.instruction_text, scene, candidates)
        obj = require_object(refined, reply.target_id)
        after = warp_mask(obj.mask, reply.transform)
        edited = await backends.drawer.draw(
            image, obj.mask, after, scene.background_prompt, scene.generation_prompt, transform=reply.transform
        )
        found = await backends.detector.detect(edited, "cat")
        return detections, scene, refined, reply, after, edited, found

    detections, scene, refined, reply, after, edited, found = asyncio.run(run())
    assert len(detections) == 1
    assert detections[0].class_label == "cat"
    assert detections[0].bbox == BoundingBox(50, 40, 150, 120)
    assert scene.background_prompt
    assert refined[1].bbox == BoundingBox(50, 40, 150, 120)
    assert reply.target_id == 1
    assert reply.transform == AffineTransform.translation(12, 8)
    assert np.array_equal(edited.pixels, image)
    assert edited.object_mask == after
    assert found == BinaryMask.full(WIDTH, HEIGHT)
    assert app.state.requests == {"ground": 1, "refine": 2, "reason": 1, "draw": 1}


def test_stub_health_endpoint():
    app = create_app(script={"reason": ["x", "y"]})

    async def run():
        async with httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url="http://stub") as client:
            return (await client.get("/health")).json()

    data = asyncio.run(run())
    assert data["status"] == "healthy"
    assert data["scripted_replies_left"] == 2


def test_http_reasoner_retries_server_errors_and_bad_replies():
    valid = render_reasoner_reply(AffineTransform.translation(-5, 0), 4, prose="Moving object 4.\n")
    app = create_app(script={"reason": [503, "I am not sure.", valid]})
    reasoner = HttpReasoner(BackendConfig(max_retries=2), transport=httpx.ASGITransport(app=app))
    reply = asyncio.run(reasoner.reason("move the cat left by 5px", SCENE, [(4, BoundingBox(0, 0, 10, 10), "cat")]))
    assert reply.target_id == 4
    assert reply.transform == AffineTransform.translation(-5, 0)
    assert app.state.requests["reason"] == 3
    assert reasoner.stats == {"attempts": 2, "parse_failures": 1}
    assert reasoner.client.stats["retries"] == 1


def test_http_reasoner_gives_up_after_its_retry_budget():
    app = create_app(script={"reason": ["no matrix", "still none", "nothing"]})
    reasoner = HttpReasoner(BackendConfig(max_retries=2), transport=httpx.ASGITransport(app=app))
    with pytest.raises(MissingMatrixTokens):
        asyncio.run(reasoner.reason("move the cat left by 5px", SCENE, [(0, BoundingBox(0, 0, 10, 10), "cat")]))
    assert reasoner.stats["attempts"] == 3


def test_model_client_failures():
    boxes = [(0, BoundingBox(0, 0, 10, 10), "cat")]
    app = create_app(script={"reason": [503, 503, 503]})
    reasoner = HttpReasoner(BackendConfig(max_retries=2), transport=httpx.ASGITransport(app=app))
    with pytest.raises(BackendUnreachable):
        asyncio.run(reasoner.reason("move the cat left by 5px", SCENE, boxes))

    app = create_app(script={"reason": [400]})
    reasoner = HttpReasoner(BackendConfig(max_retries=2), transport=httpx.ASGITransport(app=app))
    with pytest.raises(BackendError):
        asyncio.run(reasoner.reason("move the cat left by 5px", SCENE, boxes))
    assert app.state.requests["reason"] == 1

    def refuse(request):
        raise httpx.ConnectError("connection refused", request=request)

    reasoner = HttpReasoner(BackendConfig(max_retries=1), transport=httpx.MockTransport(refuse))
    with pytest.raises(BackendUnreachable):
        asyncio.run(reasoner.reason("move the cat left by 5px", SCENE, boxes))
    assert reasoner.client.stats == {"requests": 2, "retries": 1, "failures": 1}


# One contract, every HTTP backend and its in-process counterpart


@pytest.fixture(params=["http", "mock"])
def bound_backends(request, tmp_path):
    sample = make_sample(tmp_path)
    if request.param == "http":
        settings = build_pipeline_settings(ALL_HTTP, environ={})
        backend_set = BackendSet(settings, transport=httpx.ASGITransport(app=create_app()))
    else:
        backend_set = BackendSet(build_pipeline_settings({}, environ={}))
    return backend_set.bind(sample), sample


def test_grounder_contract(bound_backends):
    backends, sample = bound_backends
    detections, scene = asyncio.run(backends.grounder.ground(image_of(sample), sample.instruction_text))
    assert detections
    assert len({d.object_id for d in detections}) == len(detections)
    for d in detections:
        assert d.bbox.contains(d.point)
        assert 0 <= d.bbox.x_min < d.bbox.x_max <= WIDTH
        assert 0 <= d.bbox.y_min < d.bbox.y_max <= HEIGHT
    for name in DESCRIPTION_FIELDS:
        assert getattr(scene, name).strip()


def test_refiner_contract(bound_backends):
    backends, sample = bound_backends
    image = image_of(sample)
    detections, _ = asyncio.run(backends.grounder.ground(image, sample.instruction_text))
    refined = asyncio.run(backends.refiner.refine(image, detections))
    assert refined
    assert set(refined) <= {d.object_id for d in detections}
    for obj in refined.values():
        assert obj.mask.shape == (HEIGHT, WIDTH)
        assert not obj.mask.is_empty()
        assert obj.bbox == bbox_of_mask(obj.mask)
    assert asyncio.run(backends.refiner.refine(image, [])) == {}


def test_reasoner_contract(bound_backends):
    backends, sample = bound_backends
    candidates = [(3, sample.instance.gt_bbox, "cat"), (8, BoundingBox(0, 0, 20, 20), "bottle")]
    reply = asyncio.run(backends.reasoner.reason(sample.instruction_text, SCENE, candidates))
    assert reply.target_id == 3
    assert reply.transform.is_finite()
    with pytest.raises(NoCandidateObjects):
        asyncio.run(backends.reasoner.reason(sample.instruction_text, SCENE, []))


def test_drawer_contract(bound_backends):
    backends, sample = bound_backends
    image = image_of(sample)
    before, after = sample.instance.gt_mask, sample.gt_mask_after
    edited = asyncio.run(
        backends.drawer.draw(
            image, before, after, SCENE.background_prompt, SCENE.generation_prompt, transform=sample.gt_transform
        )
    )
    assert edited.pixels.shape == image.shape
    assert edited.pixels.dtype == image.dtype
    assert edited.provenance
    assert edited.object_mask == after
    with pytest.raises(DimensionMismatch):
        asyncio.run(backends.drawer.draw(image, BinaryMask.empty(10, 10), after, "", ""))


# In-process backends


def test_oracle_grounder_and_refiner_report_annotations(tmp_path):
    sample = make_sample(tmp_path)
    bottle_box = BoundingBox(150, 20, 190, 60)
    bottle = replace(
        sample.instance,
        class_label="bottle",
        gt_mask=BinaryMask.from_box(bottle_box, WIDTH, HEIGHT),
        gt_bbox=bottle_box,
        instance_id=5,
    )
    sample = replace(sample, other_objects=(bottle,))
    assert sample.violations() == []
    objects = ground_truth_objects(sample)
    image = image_of(sample)
    detections, scene = asyncio.run(OracleGrounder(objects).ground(image, sample.instruction_text))
    assert [(d.object_id, d.class_label, d.bbox) for d in detections] == [
        (3, "cat", BoundingBox(50, 40, 130, 120)),
        (5, "bottle", bottle_box),
    ]
    assert all(d.bbox.contains(d.point) for d in detections)
    assert scene.generation_prompt == sample.instruction_text
    refined = asyncio.run(OracleRefiner(objects).refine(image, detections))
    assert refined[3].mask == sample.instance.gt_mask
    assert refined[5].mask == bottle.gt_mask
    with pytest.raises(ObjectNotFound):
        require_object(refined, 6)

    candidates = [(d.object_id, refined[d.object_id].bbox, d.class_label) for d in detections]
    reply = asyncio.run(CompilerReasoner((WIDTH, HEIGHT)).reason(sample.instruction_text, SCENE, candidates))
    assert reply.target_id == 3


def test_jitter_grounder_is_seeded_and_bounded(tmp_path):
    sample = make_sample(tmp_path)
    objects = ground_truth_objects(sample)
    image = image_of(sample)
    a, _ = asyncio.run(JitterGrounder(objects, jitter=4.0, seed=1).ground(image, "x"))
    b, _ = asyncio.run(JitterGrounder(objects, jitter=4.0, seed=1).ground(image, "x"))
    assert a == b
    for got, want in zip(a[0].bbox.as_tuple(), (50, 40, 130, 120)):
        assert abs(got - want) <= 4.0
    exact, _ = asyncio.run(JitterGrounder(objects, jitter=0.0).ground(image, "x"))
    assert exact[0].bbox == BoundingBox(50, 40, 130, 120)
    with pytest.raises(ValueError):
        JitterGrounder(objects, jitter=-1)


def test_compiler_reasoner_reproduces_the_ground_truth(tmp_path):
    sample = make_sample(tmp_path, "scale the cat by 0.5 and move it left by 20px")
    boxes = [(3, sample.instance.gt_bbox, "cat"), (8, BoundingBox(0, 0, 20, 20), "bottle")]
    reply = asyncio.run(CompilerReasoner((WIDTH, HEIGHT)).reason(sample.instruction_text, SCENE, boxes))
    assert reply.target_id == 3
    assert reply.transform.almost_equal(sample.gt_transform)
    with pytest.raises(NoCandidateObjects):
        asyncio.run(CompilerReasoner((WIDTH, HEIGHT)).reason(sample.instruction_text, SCENE, []))


def test_noisy_reasoner_shrinks_the_edit():
    reasoner = NoisyReasoner((WIDTH, HEIGHT), relative_error=0.25)
    boxes = [(0, BoundingBox(50, 40, 130, 120), "cat")]
    reply = asyncio.run(reasoner.reason("move the cat right by 40px", SCENE, boxes))
    assert reply.transform.almost_equal(AffineTransform.translation(30, 0))
    reply = asyncio.run(reasoner.reason("rotate the cat by 40 degrees counterclockwise", SCENE, boxes))
    exact = asyncio.run(CompilerReasoner((WIDTH, HEIGHT)).reason("rotate the cat by 30°", SCENE, boxes))
    assert reply.transform.almost_equal(exact.transform)
    with pytest.raises(ValueError):
        NoisyReasoner((WIDTH, HEIGHT), relative_error=1.0)


def test_select_candidate():
    cat = (1, BoundingBox(0, 0, 5, 5), "cat")
    plant = (2, BoundingBox(5, 5, 9, 9), "pottedplant")
    assert select_candidate("move the potted plant up by 3px", [cat, plant])[0] == 2
    assert select_candidate("move it up by 3px", [plant])[0] == 2
    with pytest.raises(TargetNotFound):
        select_candidate("move the dog up by 3px", [cat, plant])


def test_reference_drawer_places_the_object(tmp_path):
    sample = make_sample(tmp_path)
    image = image_of(sample)
    before = sample.instance.gt_mask
    drawer = ReferenceDrawer(filler="inpaint", seed=sample.seed)
    edited = asyncio.run(drawer.draw(image, before, sample.gt_mask_after, "", "", transform=sample.gt_transform))
    assert edited.object_mask == sample.gt_mask_after
    assert edited.provenance == "reference-drawer/inpaint/seed=11"
    assert asyncio.run(DrawnMaskDetector().detect(edited, "cat")) == sample.gt_mask_after

    # Without a transform the drawer fits one from the mask boxes
    fitted = asyncio.run(drawer.draw(image, before, sample.gt_mask_after, "", ""))
    assert fitted.object_mask == sample.gt_mask_after
    assert box_fit_transform(before, sample.gt_mask_after).almost_equal(sample.gt_transform)

    removed = asyncio.run(drawer.draw(image, before, BinaryMask.empty(WIDTH, HEIGHT), "", ""))
    assert not (removed.pixels[before.bits] == (200, 120, 40)).all(axis=-1).any()


def test_refiner_detector_prompts_with_the_whole_image(tmp_path):
    sample = make_sample(tmp_path)
    refiner = OracleRefiner(ground_truth_objects(sample))
    edited = asyncio.run(ReferenceDrawer().draw(image_of(sample), sample.instance.gt_mask, sample.gt_mask_after, "", ""))
    assert asyncio.run(RefinerDetector(refiner).detect(edited, "cat")) == sample.instance.gt_mask
    assert asyncio.run(RefinerDetector(refiner).detect(edited, "dog")) is None


# Registry and settings


def test_default_backend_set_binds_oracles(tmp_path):
    sample = make_sample(tmp_path)
    backend_set = BackendSet(build_pipeline_settings({}, environ={}))
    assert backend_set.describe() == {"grounder": "oracle", "refiner": "oracle", "reasoner": "compiler", "drawer": "reference"}
    bound = backend_set.bind(sample)
    assert isinstance(bound.grounder, OracleGrounder)
    assert isinstance(bound.refiner, OracleRefiner)
    assert isinstance(bound.reasoner, CompilerReasoner)
    assert isinstance(bound.drawer, ReferenceDrawer)
    assert isinstance(bound.detector, DrawnMaskDetector)


def test_config_files_load():
    for name, label in (("oracle.toml", "oracle"), ("noisy.toml", "noisy-reasoner"), ("stub-http.toml", "stub-http")):
        settings = load_pipeline_settings(CONFIG_DIR / name, environ={})
        assert settings.label == label
    noisy = load_pipeline_settings(CONFIG_DIR / "noisy.toml", environ={})
    assert noisy.grounder.options == {"jitter": 4.0}
    assert noisy.drawer.options == {"filler": "telea"}
    stub = load_pipeline_settings(CONFIG_DIR / "stub-http.toml", environ={})
    assert stub.reasoner.http.max_retries == 2
    assert stub.refiner.options == {"prompt_mode": "class"}
    assert stub.template_versions() == {"grounder": "v1", "reasoner": "v1"}
    assert get_settings_summary(stub)["stages"]["drawer"] == "http -> http://127.0.0.1:8000"


def test_environment_overrides_http_settings():
    data = {"reasoner": {"kind": "http", "endpoint_url": "http://127.0.0.1:8000", "timeout": 5.0}}
    environ = {"POEM_REASONER_ENDPOINT": "http://10.0.0.2:9000/", "POEM_BACKEND_TIMEOUT": "7"}
    settings = build_pipeline_settings(data, environ=environ)
    assert settings.reasoner.http.endpoint_url == "http://10.0.0.2:9000"
    assert settings.reasoner.http.timeout == 7.0
    with pytest.raises(ConfigError):
        build_pipeline_settings(data, environ={"POEM_BACKEND_TIMEOUT": "soon"})


def test_settings_validation_and_hash():
    assert validate_settings({}) == []
    assert validate_settings({"reasoner": {"kind": "telepathy"}})
    assert validate_settings({"detector": "eyes"})
    assert validate_settings({"generation": {"t_easy": 0.1, "t_hard": 0.5}}, kind="generation")
    assert validate_settings({"reasoner": {}}) == ["[reasoner] needs a kind"]
    a = build_pipeline_settings({}, environ={})
    b = build_pipeline_settings({"reasoner": {"kind": "noisy"}}, environ={})
    assert a.config_hash() == build_pipeline_settings({}, environ={}).config_hash()
    assert a.config_hash() != b.config_hash()
