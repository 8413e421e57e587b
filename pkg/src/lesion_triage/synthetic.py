"""Synthetic desk-scale imagery for training smoke tests and demos.

Real clinical images are private, so CPU-speed functional checks run on
generated scenes: a skin-toned elliptical "subject" on a dark noisy
background, an optional class-specific lesion blob inside the subject, and
optional distractor clutter in the background. Each scene records its exact
subject mask, lesion mask, and lesion bounding box, giving every downstream
check an independent ground truth.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .imaging import save_mask_png, save_png
from .manifest import (
    CLASS_ORDER,
    DISEASE_CLASSES,
    Dataset,
    DiseaseClass,
    ImageRecord,
    Provenance,
    Source,
    save_manifest,
)

SKIN_RGB = (205, 168, 142)

# Visually distinct lesion colors and shapes per class.
LESION_RGB: dict[DiseaseClass, tuple[int, int, int]] = {
    DiseaseClass.GENITAL_WARTS: (215, 190, 60),
    DiseaseClass.HERPES_ERUPTION: (70, 185, 70),
    DiseaseClass.PENILE_CANCER: (60, 80, 215),
    DiseaseClass.PENILE_CANDIDIASIS: (246, 246, 240),
    DiseaseClass.SYPHILITIC_CHANCRE: (175, 60, 185),
}


@dataclass(frozen=True)
class SceneSample:
    image: np.ndarray               # (H, W, 3) uint8
    subject_mask: np.ndarray        # (H, W) bool
    lesion_mask: Optional[np.ndarray]
    lesion_box: Optional[tuple[int, int, int, int]]  # half-open (x0, y0, x1, y1)
    label: DiseaseClass


def _noise(shape, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    return rng.normal(0.0, amplitude, shape)


def _draw_lesion(draw: ImageDraw.ImageDraw, cls: DiseaseClass, cx: int, cy: int,
                 r: int, rng: random.Random, color=None) -> None:
    if color is None:
        color = LESION_RGB[cls]
    if cls is DiseaseClass.GENITAL_WARTS:
        for _ in range(5):
            dx = rng.randint(-r // 2, r // 2)
            dy = rng.randint(-r // 2, r // 2)
            rr = max(2, r // 2)
            draw.ellipse([cx + dx - rr, cy + dy - rr, cx + dx + rr, cy + dy + rr], fill=color)
    elif cls is DiseaseClass.HERPES_ERUPTION:
        width = max(2, r // 3)
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=color, width=width)
    elif cls is DiseaseClass.PENILE_CANCER:
        points = []
        for k in range(7):
            ang = 2 * np.pi * k / 7
            rad = r * rng.uniform(0.6, 1.0)
            points.append((cx + rad * np.cos(ang), cy + rad * np.sin(ang)))
        draw.polygon(points, fill=color)
    elif cls is DiseaseClass.PENILE_CANDIDIASIS:
        draw.rounded_rectangle([cx - r, cy - int(r * 0.7), cx + r, cy + int(r * 0.7)],
                               radius=r // 3, fill=color)
    else:  # syphilitic chancre
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)


def make_scene(
    label: DiseaseClass,
    size: int,
    rng: random.Random,
    clutter: int = 0,
    bg_level: Optional[float] = None,
) -> SceneSample:
    """One scene: subject ellipse, optional lesion, optional background clutter.

    ``bg_level`` pins the background base brightness; by default it varies
    widely (including near-black) so masked-out backgrounds stay
    in-distribution for the classifier.
    """
    np_rng = np.random.default_rng(rng.randrange(2**31))
    if bg_level is None:
        bg_level = 0.0 if rng.random() < 0.25 else rng.uniform(10, 70)

    # Subject ellipse geometry.
    cx = size / 2 + rng.uniform(-size / 10, size / 10)
    cy = size / 2 + rng.uniform(-size / 10, size / 10)
    ax = rng.uniform(size * 0.30, size * 0.42)
    ay = rng.uniform(size * 0.24, size * 0.36)

    yy, xx = np.mgrid[0:size, 0:size]
    ell = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2
    subject = ell <= 1.0

    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = bg_level
    image += _noise((size, size, 3), np_rng, 12.0)
    skin = np.asarray(SKIN_RGB, dtype=np.float64) * rng.uniform(0.85, 1.1)
    image[subject] = skin + _noise((int(subject.sum()), 3), np_rng, 9.0)

    # Background clutter: lesion-colored distractors outside the subject.
    if clutter > 0:
        layer = Image.new("L", (size, size), 0)
        clutter_img = np.zeros((size, size, 3), dtype=np.float64)
        ldraw = ImageDraw.Draw(layer)
        palette = [c for c in DISEASE_CLASSES if c is not label]
        for _ in range(clutter):
            for _attempt in range(50):
                px = rng.randint(2, size - 3)
                py = rng.randint(2, size - 3)
                if ((px - cx) / ax) ** 2 + ((py - cy) / ay) ** 2 > 1.35:
                    break
            distractor = palette[rng.randrange(len(palette))]
            r = rng.randint(size // 14, size // 8)
            single = Image.new("L", (size, size), 0)
            _draw_lesion(ImageDraw.Draw(single), distractor, px, py, r, rng, color=255)
            single_mask = np.asarray(single) > 0
            clutter_img[single_mask] = LESION_RGB[distractor]
            ldraw.bitmap((0, 0), single, fill=255)
        clutter_mask = (np.asarray(layer) > 0) & ~subject
        image[clutter_mask] = clutter_img[clutter_mask] + _noise(
            (int(clutter_mask.sum()), 3), np_rng, 6.0
        )

    # The lesion itself, inside the subject.
    lesion_mask = None
    lesion_box = None
    if label is not DiseaseClass.NON_DISEASED:
        r = rng.randint(max(3, size // 9), max(4, size // 6))
        for _attempt in range(100):
            lx = rng.randint(r + 1, size - r - 2)
            ly = rng.randint(r + 1, size - r - 2)
            if ((lx - cx) / ax) ** 2 + ((ly - cy) / ay) ** 2 < 0.45:
                break
        shape_seed = rng.randrange(2**31)
        layer = Image.new("L", (size, size), 0)
        _draw_lesion(ImageDraw.Draw(layer), label, lx, ly, r, random.Random(shape_seed), color=255)
        lesion_mask = np.asarray(layer) > 0
        color_img = Image.new("RGB", (size, size), (0, 0, 0))
        _draw_lesion(ImageDraw.Draw(color_img), label, lx, ly, r, random.Random(shape_seed))
        colors = np.asarray(color_img, dtype=np.float64)
        image[lesion_mask] = colors[lesion_mask] + _noise(
            (int(lesion_mask.sum()), 3), np_rng, 6.0
        )
        rows = np.flatnonzero(lesion_mask.any(axis=1))
        cols = np.flatnonzero(lesion_mask.any(axis=0))
        lesion_box = (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)

    return SceneSample(
        image=np.clip(image, 0, 255).astype(np.uint8),
        subject_mask=subject,
        lesion_mask=lesion_mask,
        lesion_box=lesion_box,
        label=label,
    )


def segmentation_pairs(
    n: int, size: int, seed: int, clutter_range: tuple[int, int] = (0, 3)
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(image, binary subject mask) pairs for segmenter training."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        label = CLASS_ORDER[i % len(CLASS_ORDER)]
        scene = make_scene(label, size, rng, clutter=rng.randint(*clutter_range))
        pairs.append((scene.image, scene.subject_mask.astype(np.uint8)))
    return pairs


def classification_scenes(
    n_per_class: int, size: int, seed: int, clutter: int = 0,
    classes: Sequence[DiseaseClass] = CLASS_ORDER,
) -> list[SceneSample]:
    rng = random.Random(seed)
    scenes = []
    for cls in classes:
        for _ in range(n_per_class):
            scenes.append(make_scene(cls, size, rng, clutter=clutter))
    return scenes


def write_scene_dataset(
    scenes: Sequence[SceneSample],
    root: str | Path,
    with_subject_masks: bool = True,
    with_lesion_masks: bool = False,
    id_prefix: str = "syn",
) -> Dataset:
    """Materialize scenes as PNGs + manifest under ``root`` (images_root = root)."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i, scene in enumerate(scenes):
        rec_id = f"{id_prefix}-{i:04d}"
        rel = f"images/{rec_id}.png"
        save_png(scene.image, root / rel)
        mask_path = None
        if with_subject_masks:
            mask_path = f"images/{rec_id}.subject.png"
            save_mask_png(scene.subject_mask, root / mask_path)
        extras = {}
        if with_lesion_masks and scene.lesion_mask is not None:
            lesion_rel = f"images/{rec_id}.lesion.png"
            save_mask_png(scene.lesion_mask, root / lesion_rel)
            extras["lesion_mask_path"] = lesion_rel
        records.append(ImageRecord(
            id=rec_id,
            path=rel,
            width_px=scene.image.shape[1],
            height_px=scene.image.shape[0],
            provenance=Provenance(Source.CLINICIAN, origin_note="synthetic"),
            label=scene.label,
            mask_path=mask_path,
            extras=extras,
        ))
    dataset = Dataset(records)
    save_manifest(dataset, root / "manifest.jsonl")
    return dataset
