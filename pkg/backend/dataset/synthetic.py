"""
Synthetic VOC-layout fixtures with exactly known instance boxes.
"""
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from PIL import Image

from backend.dataset.voc import VOC_CLASSES

Box = Tuple[int, int, int, int]

CLEAN_CLASSES = ("cat", "dog", "bus", "bottle", "chair", "cow", "pottedplant", "tvmonitor", "horse", "sheep")


@dataclass(frozen=True)
class SyntheticObject:
    class_label: str
    box: Box
    shape: str = "rect"
    truncated: bool = False


@dataclass(frozen=True)
class SyntheticScene:
    stem: str
    width: int
    height: int
    objects: Tuple[SyntheticObject, ...] = field(default_factory=tuple)


def voc_palette() -> List[int]:
    """The standard 256-entry VOC colour map, flattened for Image.putpalette"""
    palette = []
    for i in range(256):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        palette.extend((r, g, b))
    return palette


def shape_mask(obj: SyntheticObject, width: int, height: int) -> np.ndarray:
    x0, y0, x1, y1 = obj.box
    bits = np.zeros((height, width), dtype=bool)
    if obj.shape == "rect":
        bits[y0:y1, x0:x1] = True
        return bits
    if obj.shape == "ellipse":
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        rx, ry = (x1 - x0) / 2.0, (y1 - y0) / 2.0
        yy, xx = np.mgrid[0:height, 0:width]
        return ((xx + 0.5 - cx) / rx) ** 2 + ((yy + 0.5 - cy) / ry) ** 2 <= 1.0
    raise ValueError(f"unknown shape {obj.shape!r}")


def object_color(class_label: str) -> Tuple[int, int, int]:
    idx = VOC_CLASSES.index(class_label) + 1 if class_label in VOC_CLASSES else 7
    return (40 + (idx * 53) % 200, 40 + (idx * 97) % 200, 40 + (idx * 31) % 200)


def render_scene(scene: SyntheticScene) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(RGB pixels, instance index raster, class index raster)"""
    w, h = scene.width, scene.height
    yy, xx = np.mgrid[0:h, 0:w]
    pixels = np.stack(
        [60 + (xx * 100) // max(w, 1), np.full_like(xx, 110), 60 + (yy * 100) // max(h, 1)], axis=-1
    ).astype(np.uint8)
    instances = np.zeros((h, w), dtype=np.uint8)
    classes = np.zeros((h, w), dtype=np.uint8)
    for i, obj in enumerate(scene.objects, start=1):
        bits = shape_mask(obj, w, h)
        pixels[bits] = object_color(obj.class_label)
        instances[bits] = i
        classes[bits] = VOC_CLASSES.index(obj.class_label) + 1 if obj.class_label in VOC_CLASSES else 0
    return pixels, instances, classes


def _palette_png(indices: np.ndarray, path: Path):
    h, w = indices.shape
    img = Image.frombytes("P", (w, h), np.ascontiguousarray(indices, dtype=np.uint8).tobytes())
    img.putpalette(voc_palette())
    img.save(path, format="PNG")


def _annotation(scene: SyntheticScene) -> ET.ElementTree:
    root = ET.Element("annotation")
    ET.SubElement(root, "folder").text = "VOC2012"
    ET.SubElement(root, "filename").text = f"{scene.stem}.jpg"
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(scene.width)
    ET.SubElement(size, "height").text = str(scene.height)
    ET.SubElement(size, "depth").text = "3"
    ET.SubElement(root, "segmented").text = "1"
    for obj in scene.objects:
        el = ET.SubElement(root, "object")
        ET.SubElement(el, "name").text = obj.class_label
        ET.SubElement(el, "pose").text = "Unspecified"
        ET.SubElement(el, "truncated").text = "1" if obj.truncated else "0"
        ET.SubElement(el, "difficult").text = "0"
        box = ET.SubElement(el, "bndbox")
        for tag, value in zip(("xmin", "ymin", "xmax", "ymax"), obj.box):
            ET.SubElement(box, tag).text = str(value)
    return ET.ElementTree(root)


def write_synthetic_voc(root: Union[str, Path], scenes: Sequence[SyntheticScene]) -> Path:
    root = Path(root)
    dirs = {
        name: root / name
        for name in ("JPEGImages", "SegmentationObject", "SegmentationClass", "Annotations")
    }
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    (root / "ImageSets" / "Segmentation").mkdir(parents=True, exist_ok=True)

    for scene in scenes:
        pixels, instances, classes = render_scene(scene)
        Image.fromarray(pixels).save(dirs["JPEGImages"] / f"{scene.stem}.jpg", format="JPEG", quality=95)
        _palette_png(instances, dirs["SegmentationObject"] / f"{scene.stem}.png")
        _palette_png(classes, dirs["SegmentationClass"] / f"{scene.stem}.png")
        _annotation(scene).write(dirs["Annotations"] / f"{scene.stem}.xml", encoding="utf-8", xml_declaration=False)

    split = root / "ImageSets" / "Segmentation" / "trainval.txt"
    split.write_text("".join(f"{s.stem}\n" for s in scenes))
    logger.info(f"Wrote {len(scenes)} synthetic VOC images to {root}")
    return root


def filter_scenes(width: int = 200, height: int = 160) -> List[SyntheticScene]:
    """Seven images, twelve instances, dedicated cases for every filter rule"""
    return [
        SyntheticScene("fx_cat", width, height, (SyntheticObject("cat", (50, 40, 130, 120)),)),
        SyntheticScene(
            "fx_dogs",
            width,
            height,
            (SyntheticObject("dog", (20, 30, 80, 100)), SyntheticObject("dog", (110, 40, 170, 120))),
        ),
        SyntheticScene(
            "fx_pets",
            width,
            height,
            (
                SyntheticObject("dog", (10, 10, 50, 50)),
                SyntheticObject("dog", (60, 10, 100, 50)),
                SyntheticObject("cat", (110, 70, 170, 130)),
            ),
        ),
        SyntheticScene("fx_bird", width, height, (SyntheticObject("bird", (60, 50, 120, 110), truncated=True),)),
        SyntheticScene("fx_sheep", width, height, (SyntheticObject("sheep", (90, 70, 100, 78)),)),
        SyntheticScene("fx_horse", width, height, (SyntheticObject("horse", (0, 50, 80, 130)),)),
        SyntheticScene(
            "fx_table",
            width,
            height,
            (
                SyntheticObject("person", (20, 20, 60, 140)),
                SyntheticObject("bottle", (80, 60, 100, 120)),
                SyntheticObject("chair", (120, 50, 180, 130)),
            ),
        ),
    ]


def clean_scenes(n: int, width: int = 200, height: int = 160, shape: str = "rect") -> List[SyntheticScene]:
    """n single-object images that pass every filter with default settings"""
    scenes = []
    for i in range(n):
        w = 40 + (i * 13) % 40
        h = 36 + (i * 7) % 40
        x0 = 30 + (i * 17) % (width - w - 59)
        y0 = 30 + (i * 11) % (height - h - 59)
        label = CLEAN_CLASSES[i % len(CLEAN_CLASSES)]
        scenes.append(
            SyntheticScene(f"syn_{i:04d}", width, height, (SyntheticObject(label, (x0, y0, x0 + w, y0 + h), shape),))
        )
    return scenes
