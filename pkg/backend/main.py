"""
Canned-reply model server.

Speaks the same HTTP protocol as the real grounding, segmentation, reasoning
and diffusion servers (protocol.md) so pipeline runs and backend tests need
no model weights and no network beyond localhost.
"""
import json
import re
from collections import deque
from pathlib import Path
from string import Template
from typing import Deque, Dict, List, Optional, Union

from fastapi import FastAPI, HTTPException
from loguru import logger

from backend.editops import parse_target
from backend.geometry import BinaryMask, BoundingBox, image_from_b64, mask_from_b64, mask_to_b64
from backend.schemas import (
    DrawRequest,
    DrawResponse,
    GroundRequest,
    GroundResponse,
    HealthResponse,
    ReasonRequest,
    ReasonResponse,
    RefinedObject,
    RefineRequest,
    RefineResponse,
)

VERSION = "1.0.0"
FIXTURE_DIR = Path(__file__).parent / "fixtures" / "stub"
ENDPOINTS = ("ground", "refine", "reason", "draw")

# Scripted entry: reply text, or an HTTP status code to fail with
ScriptEntry = Union[str, int]

_GROUNDING_INSTRUCTION = re.compile(r"instruction:\s*\n(.+)")
_CANDIDATE_LINE = re.compile(r"(?m)^(\d+), ")


def _load_fixtures(fixture_dir: Path) -> Dict[str, object]:
    return {
        "grounding": json.loads((fixture_dir / "grounding_reply.json").read_text(encoding="utf-8")),
        "reasoner": Template((fixture_dir / "reasoner_reply.txt").read_text(encoding="utf-8")),
    }


def create_app(
    script: Optional[Dict[str, List[ScriptEntry]]] = None,
    fixture_dir: Union[str, Path] = FIXTURE_DIR,
) -> FastAPI:
    """
    Build a stub server. `script` maps an endpoint name to replies served
    before the canned ones, in order; an int entry fails that request with
    the given status code.
    """
    fixtures = _load_fixtures(Path(fixture_dir))
    queues: Dict[str, Deque[ScriptEntry]] = {name: deque((script or {}).get(name, [])) for name in ENDPOINTS}

    app = FastAPI(
        title="POEM stub model server",
        description="Canned grounding, refinement, reasoning and drawing replies for offline runs",
        version=VERSION,
    )
    app.state.requests = {name: 0 for name in ENDPOINTS}

    def scripted(name: str) -> Optional[str]:
        app.state.requests[name] += 1
        if not queues[name]:
            return None
        entry = queues[name].popleft()
        if isinstance(entry, int):
            logger.debug(f"stub /{name}: scripted HTTP {entry}")
            raise HTTPException(status_code=entry, detail=f"scripted failure on /{name}")
        return entry

    def decode_image(data: str):
        try:
            return image_from_b64(data)
        except Exception as e:
            raise HTTPException(status_code=400, detail=f"unreadable image: {e}")

    @app.get("/health", response_model=HealthResponse)
    async def health_check():
        return HealthResponse(status="healthy", version=VERSION, scripted_replies_left=sum(len(q) for q in queues.values()))

    @app.post("/ground", response_model=GroundResponse)
    async def ground(request: GroundRequest):
        reply = scripted("ground")
        if reply is not None:
            return GroundResponse(reply=reply)

        pixels = decode_image(request.image_b64)
        height, width = pixels.shape[:2]
        canned = fixtures["grounding"]
        match = _GROUNDING_INSTRUCTION.search(request.prompt)
        label = (parse_target(match.group(1)) if match else None) or "object"

        # Centered box covering box_fraction of each side
        margin = (1.0 - float(canned.get("box_fraction", 0.5))) / 2.0
        x0, y0 = int(width * margin), int(height * margin)
        x1, y1 = max(x0 + 1, width - x0), max(y0 + 1, height - y0)
        payload = {
            "objects": [
                {"object_id": 1, "class_label": label, "bbox": [x0, y0, x1, y1], "point": [(x0 + x1) // 2, (y0 + y1) // 2]}
            ],
            "scene": canned["scene"],
            "relationships": canned["relationships"],
            "background_prompt": canned["background_prompt"],
            "generation_prompt": canned["generation_prompt"],
        }
        text = f"{canned.get('prose', '')}\n```json\n{json.dumps(payload, indent=2)}\n```\n"
        return GroundResponse(reply=text)

    @app.post("/refine", response_model=RefineResponse)
    async def refine(request: RefineRequest):
        scripted("refine")
        pixels = decode_image(request.image_b64)
        height, width = pixels.shape[:2]
        objects = []
        for det in request.detections:
            try:
                box = BoundingBox(*det.bbox).clamp(width, height)
            except ValueError:
                box = None
            if box is None:
                continue
            objects.append(RefinedObject(object_id=det.object_id, mask_b64=mask_to_b64(BinaryMask.from_box(box, width, height))))
        return RefineResponse(objects=objects)

    @app.post("/reason", response_model=ReasonResponse)
    async def reason(request: ReasonRequest):
        reply = scripted("reason")
        if reply is not None:
            return ReasonResponse(reply=reply)
        ids = _CANDIDATE_LINE.findall(request.prompt)
        object_id = ids[0] if ids else "0"
        return ReasonResponse(reply=fixtures["reasoner"].substitute(object_id=object_id))

    @app.post("/draw", response_model=DrawResponse)
    async def draw(request: DrawRequest):
        scripted("draw")
        decode_image(request.image_b64)
        try:
            mask_from_b64(request.after_mask_b64)
        except Exception as e:
            raise HTTPException(status_code=400, detail=f"unreadable after mask: {e}")
        # The object is reported where it was asked to go; pixels are echoed unchanged
        return DrawResponse(image_b64=request.image_b64, mask_b64=request.after_mask_b64)

    return app


app = create_app()
