"""
PASCAL VOC segmentation ingestion.

Layout under the root directory:
    JPEGImages/<stem>.jpg
    SegmentationObject/<stem>.png   palette index i = i-th object of the XML, 255 = void
    SegmentationClass/<stem>.png
    Annotations/<stem>.xml
    ImageSets/Segmentation/trainval.txt
"""
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from loguru import logger
from PIL import Image

from backend.dataset.types import SourceInstance
from backend.exceptions import MalformedAnnotation, MissingMask
from backend.geometry import BinaryMask, bbox_of_mask

VOID_INDEX = 255

VOC_CLASSES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)


def _stems(root: Path) -> List[str]:
    split = root / "ImageSets" / "Segmentation" / "trainval.txt"
    if split.is_file():
        return [line.split()[0] for line in split.read_text().splitlines() if line.strip()]
    seg_dir = root / "SegmentationObject"
    if not seg_dir.is_dir():
        return []
    return sorted(p.stem for p in seg_dir.glob("*.png"))


def parse_annotation(path: Path) -> Tuple[Tuple[int, int], List[Tuple[str, bool]]]:
    """((width, height) or (0, 0) when absent, [(class name, truncated), ...] in file order)"""
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as e:
        raise MalformedAnnotation(path, str(e)) from e

    size = (0, 0)
    size_el = root.find("size")
    if size_el is not None:
        try:
            size = (int(size_el.findtext("width")), int(size_el.findtext("height")))
        except (TypeError, ValueError) as e:
            raise MalformedAnnotation(path, "bad <size>") from e

    objects = []
    for i, obj in enumerate(root.findall("object")):
        name = (obj.findtext("name") or "").strip()
        if not name:
            raise MalformedAnnotation(path, f"object {i + 1} has no <name>")
        truncated = (obj.findtext("truncated") or "0").strip() in ("1", "true")
        objects.append((name, truncated))
    return size, objects


def _instance_raster(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("P", "L"):
            raise MalformedAnnotation(path, f"instance mask must be a palette or grey image, got mode {img.mode}")
        return np.asarray(img).copy()


def _image_path(root: Path, stem: str) -> Path:
    for ext in (".jpg", ".jpeg", ".png"):
        candidate = root / "JPEGImages" / f"{stem}{ext}"
        if candidate.is_file():
            return candidate
    return root / "JPEGImages" / f"{stem}.jpg"


def ingest_voc(annotation_dir: Union[str, Path]) -> List[SourceInstance]:
    root = Path(annotation_dir)
    instances: List[SourceInstance] = []
    stems = _stems(root)
    for stem in stems:
        mask_path = root / "SegmentationObject" / f"{stem}.png"
        if not mask_path.is_file():
            raise MissingMask(stem)
        xml_path = root / "Annotations" / f"{stem}.xml"
        if not xml_path.is_file():
            raise MalformedAnnotation(xml_path, "annotation file is missing")

        (xml_w, xml_h), objects = parse_annotation(xml_path)
        raster = _instance_raster(mask_path)
        height, width = raster.shape
        if (xml_w, xml_h) != (0, 0) and (xml_w, xml_h) != (width, height):
            raise MalformedAnnotation(xml_path, f"size {xml_w}x{xml_h} disagrees with the {width}x{height} mask")

        ids = [int(v) for v in np.unique(raster) if v not in (0, VOID_INDEX)]
        if ids and ids[-1] > len(objects):
            raise MalformedAnnotation(xml_path, f"mask has instance {ids[-1]} but only {len(objects)} objects are listed")

        for instance_id in ids:
            mask = BinaryMask(raster == instance_id)
            label, truncated = objects[instance_id - 1]
            instances.append(
                SourceInstance(
                    image_ref=stem,
                    image_path=_image_path(root, stem),
                    class_label=label,
                    gt_mask=mask,
                    gt_bbox=bbox_of_mask(mask),
                    image_width=width,
                    image_height=height,
                    instance_id=instance_id,
                    truncated=truncated,
                )
            )
    logger.info(f"Ingested {len(instances)} instances from {len(stems)} images under {root}")
    return instances
