"""
Prompt construction for the grounding and reasoning backends.

Templates are versioned data files under templates/ so that every run can
record the exact hash of the text it sent.
"""
import hashlib
from functools import lru_cache
from pathlib import Path
from string import Template
from typing import Iterable, Tuple

from backend.exceptions import EmptyInstruction, NoCandidateObjects
from backend.geometry import BoundingBox
from backend.llmproto.types import SceneDescriptions

TEMPLATE_DIR = Path(__file__).parent / "templates"
DEFAULT_TEMPLATE_VERSION = "v1"

Candidate = Tuple[int, BoundingBox, str]


def _template_path(kind: str, version: str) -> Path:
    path = TEMPLATE_DIR / f"{kind}_{version}.txt"
    if not path.is_file():
        raise FileNotFoundError(f"no {kind} prompt template for version {version!r} ({path})")
    return path


@lru_cache(maxsize=None)
def _load_template(kind: str, version: str) -> Template:
    return Template(_template_path(kind, version).read_text(encoding="utf-8"))


def template_hash(version: str = DEFAULT_TEMPLATE_VERSION) -> str:
    """sha256 over both template files of a version"""
    digest = hashlib.sha256()
    for kind in ("grounding", "reasoner"):
        digest.update(_template_path(kind, version).read_bytes())
    return digest.hexdigest()


def _format_number(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def format_box(box: BoundingBox) -> str:
    return "[" + ", ".join(_format_number(v) for v in box.as_tuple()) + "]"


def build_grounding_prompt(edit_instruction: str, version: str = DEFAULT_TEMPLATE_VERSION) -> str:
    if not edit_instruction or not edit_instruction.strip():
        raise EmptyInstruction("grounding prompt needs a non-empty edit instruction")
    return _load_template("grounding", version).substitute(instruction=edit_instruction.strip())


def build_reasoner_prompt(
    instruction: str,
    scene: SceneDescriptions,
    boxes: Iterable[Candidate],
    version: str = DEFAULT_TEMPLATE_VERSION,
) -> str:
    candidates = list(boxes)
    if not candidates:
        raise NoCandidateObjects("reasoner prompt needs at least one candidate object")
    if not instruction or not instruction.strip():
        raise EmptyInstruction("reasoner prompt needs a non-empty edit instruction")
    lines = [f"{object_id}, {label}, {format_box(box)}" for object_id, box, label in candidates]
    return _load_template("reasoner", version).substitute(
        scene=scene.scene,
        relationships=scene.relationships,
        objects="\n".join(lines),
        instruction=instruction.strip(),
    )
