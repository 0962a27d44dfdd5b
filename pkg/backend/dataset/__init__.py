from backend.dataset.filters import DROP_REASONS, FilterResult, filter_instances
from backend.dataset.generator import OpSampler, derive_seed, generate
from backend.dataset.manifest import Manifest, load_manifest, samples_frame, summarize_manifest, write_manifest
from backend.dataset.synthetic import (
    SyntheticObject,
    SyntheticScene,
    clean_scenes,
    filter_scenes,
    render_scene,
    write_synthetic_voc,
)
from backend.dataset.templates import FORMS_PER_KIND, display_name, paraphrases, render_template
from backend.dataset.types import Difficulty, EditSample, SourceInstance, bucket_difficulty
from backend.dataset.voc import VOC_CLASSES, ingest_voc, parse_annotation

__all__ = [
    "DROP_REASONS",
    "FORMS_PER_KIND",
    "VOC_CLASSES",
    "Difficulty",
    "EditSample",
    "FilterResult",
    "Manifest",
    "OpSampler",
    "SourceInstance",
    "SyntheticObject",
    "SyntheticScene",
    "bucket_difficulty",
    "clean_scenes",
    "derive_seed",
    "display_name",
    "filter_instances",
    "filter_scenes",
    "generate",
    "ingest_voc",
    "load_manifest",
    "paraphrases",
    "parse_annotation",
    "render_scene",
    "render_template",
    "samples_frame",
    "summarize_manifest",
    "write_manifest",
    "write_synthetic_voc",
]
