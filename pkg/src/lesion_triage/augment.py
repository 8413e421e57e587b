"""Layered image augmentation.

Two stages: (1) lesion patterns are extracted from diseased images and
composited onto non-diseased base images, with placement, scale, orientation,
and complexion adjustments, producing new unverified records; (2) per-epoch
random transforms (rotation, rescale, shifts, brightness, flips, size and
color jitter) are applied online during training, never materialized to disk.

All stochastic operations are pure functions of (inputs, seed).
"""

from __future__ import annotations

import json
import math
import random
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    DimensionMismatchError,
    EmptyMaskError,
    InsufficientSourcesError,
    PatternLargerThanBaseError,
    PlacementOutsideSubjectError,
)
from .imaging import load_rgb, save_png
from .manifest import (
    Dataset,
    DiseaseClass,
    ImageRecord,
    Provenance,
    Source,
    Verification,
    class_distribution,
)

DEFAULT_FEATHER_PX = 3


@dataclass(frozen=True, eq=False)
class LesionPattern:
    """An RGBA cutout of a visually recognizable disease pattern.

    The alpha channel is the lesion mask within the bounding-box crop.
    """

    pixels: np.ndarray  # (H, W, 4) uint8
    source_class: DiseaseClass
    source_id: str
    mean_color: tuple[float, float, float]

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4:
            raise ValueError("pattern pixels must be an RGBA raster")
        if self.source_class is DiseaseClass.NON_DISEASED:
            raise ValueError("a lesion pattern cannot come from a non-diseased image")
        alpha = self.pixels[:, :, 3]
        if np.count_nonzero(alpha) < 0.01 * alpha.size:
            raise ValueError("pattern alpha covers less than 1% of its raster")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class OverlayRecipe:
    """Reproducible placement of one pattern onto one base image."""

    placement_center: tuple[float, float]  # normalized (x, y) in the base frame
    scale: float = 1.0
    rotation: float = 0.0
    complexion_shift: tuple[int, int, int] = (0, 0, 0)
    flip_h: bool = False
    flip_v: bool = False
    recipe_id: str = ""
    seed: int = 0

    def __post_init__(self):
        if not 0.1 <= self.scale <= 3.0:
            raise ValueError(f"scale {self.scale} outside [0.1, 3.0]")
        cx, cy = self.placement_center
        if not (0 <= cx <= 1 and 0 <= cy <= 1):
            raise ValueError("placement_center must be normalized to [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def extract_pattern(
    image: np.ndarray, lesion_mask: np.ndarray, source_class: DiseaseClass
) -> LesionPattern:
    """Crop the mask's bounding box out of the image as an RGBA pattern."""
    if image.shape[:2] != lesion_mask.shape:
        raise DimensionMismatchError(
            f"image {image.shape[:2]} vs mask {lesion_mask.shape}"
        )
    mask = lesion_mask.astype(bool)
    if not mask.any():
        raise EmptyMaskError("lesion mask is empty")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, y1 = rows[0], rows[-1] + 1
    x0, x1 = cols[0], cols[-1] + 1
    crop = image[y0:y1, x0:x1]
    crop_mask = mask[y0:y1, x0:x1]
    rgba = np.dstack([crop, crop_mask.astype(np.uint8) * 255])
    mean_color = tuple(float(v) for v in image[mask].mean(axis=0))
    return LesionPattern(rgba, source_class, source_id="", mean_color=mean_color)


def complexion_shift_for(
    pattern: LesionPattern,
    base: np.ndarray,
    base_subject_mask: np.ndarray,
    weight: float = 0.5,
) -> tuple[int, int, int]:
    """Additive RGB shift moving the pattern mean toward the base subject mean."""
    subject_mean = base[base_subject_mask.astype(bool)].mean(axis=0)
    delta = weight * (subject_mean - np.asarray(pattern.mean_color))
    return tuple(int(round(d)) for d in delta)


def _transform_pattern(pixels: np.ndarray, recipe: OverlayRecipe) -> np.ndarray:
    out = pixels
    if recipe.flip_h:
        out = out[:, ::-1]
    if recipe.flip_v:
        out = out[::-1, :]
    if recipe.scale != 1.0:
        h, w = out.shape[:2]
        new_w = max(1, int(round(w * recipe.scale)))
        new_h = max(1, int(round(h * recipe.scale)))
        out = np.asarray(
            Image.fromarray(np.ascontiguousarray(out)).resize((new_w, new_h), Image.BILINEAR)
        )
    if recipe.rotation % 360 != 0:
        im = Image.fromarray(np.ascontiguousarray(out)).rotate(
            recipe.rotation, expand=True, resample=Image.BILINEAR
        )
        out = np.asarray(im)
    return np.ascontiguousarray(out)


def _feather_alpha(alpha: np.ndarray, feather_px: int) -> np.ndarray:
    """Linear alpha ramp over ``feather_px`` pixels inside the footprint.

    The ramp only attenuates interior pixels near the footprint edge; it
    never extends the footprint, so locality is preserved exactly.
    """
    if feather_px <= 0:
        return alpha
    inside = alpha > 0
    padded = np.pad(inside, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    ramp = np.clip(dist / feather_px, 0.0, 1.0)
    return alpha * ramp


def composite_pattern(
    base: np.ndarray,
    base_subject_mask: np.ndarray,
    pattern: LesionPattern,
    recipe: OverlayRecipe,
    feather_px: int = DEFAULT_FEATHER_PX,
) -> np.ndarray:
    """Alpha-blend the transformed, complexion-shifted pattern onto the base.

    Pixels outside the transformed pattern footprint are byte-identical to
    the base image.
    """
    if base.shape[:2] != base_subject_mask.shape:
        raise DimensionMismatchError(
            f"base {base.shape[:2]} vs subject mask {base_subject_mask.shape}"
        )
    bh, bw = base.shape[:2]
    cx, cy = recipe.placement_center
    px = int(round(cx * (bw - 1)))
    py = int(round(cy * (bh - 1)))
    if not base_subject_mask.astype(bool)[py, px]:
        raise PlacementOutsideSubjectError(
            f"placement center ({px}, {py}) lies outside the subject mask"
        )

    transformed = _transform_pattern(pattern.pixels, recipe)
    th, tw = transformed.shape[:2]
    if th > bh or tw > bw:
        raise PatternLargerThanBaseError(
            f"pattern {tw}x{th} exceeds base {bw}x{bh} after scaling"
        )

    y0 = py - th // 2
    x0 = px - tw // 2
    sy0, sx0 = max(0, -y0), max(0, -x0)
    dy0, dx0 = max(0, y0), max(0, x0)
    dy1 = min(bh, y0 + th)
    dx1 = min(bw, x0 + tw)
    region = transformed[sy0 : sy0 + (dy1 - dy0), sx0 : sx0 + (dx1 - dx0)]

    shift = np.asarray(recipe.complexion_shift, dtype=np.int16)
    rgb = np.clip(region[:, :, :3].astype(np.int16) + shift, 0, 255).astype(np.float64)
    alpha = _feather_alpha(region[:, :, 3].astype(np.float64) / 255.0, feather_px)

    out = base.copy()
    target = out[dy0:dy1, dx0:dx1].astype(np.float64)
    blended = alpha[:, :, None] * rgb + (1.0 - alpha[:, :, None]) * target
    out[dy0:dy1, dx0:dx1] = np.rint(blended).astype(np.uint8)
    return out


def compose_overlay(
    base: ImageRecord,
    base_subject_mask: np.ndarray,
    pattern: LesionPattern,
    recipe: OverlayRecipe,
    images_root: str | Path,
    out_dir: str | Path,
    feather_px: int = DEFAULT_FEATHER_PX,
) -> ImageRecord:
    """Composite onto a non-diseased base record and persist image + recipe.

    The new record is labeled with the pattern's class, provenance Augmented,
    and enters the dataset Unverified; expert review happens elsewhere.
    """
    if base.label is not DiseaseClass.NON_DISEASED:
        raise ValueError(f"base record {base.id!r} must be labeled non-diseased")
    base_pixels = load_rgb(Path(images_root) / base.path)
    composited = composite_pattern(base_pixels, base_subject_mask, pattern, recipe, feather_px)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    recipe_id = recipe.recipe_id or uuid.uuid4().hex[:12]
    new_id = f"{base.id}-aug-{recipe_id}"
    image_name = f"{new_id}.png"
    save_png(composited, out_dir / image_name)
    (out_dir / f"{new_id}.recipe.json").write_text(recipe.to_json() + "\n", encoding="utf-8")

    try:
        rel_path = str((out_dir / image_name).relative_to(images_root))
    except ValueError:
        rel_path = str(out_dir / image_name)
    return ImageRecord(
        id=new_id,
        path=rel_path,
        width_px=composited.shape[1],
        height_px=composited.shape[0],
        provenance=Provenance(Source.AUGMENTED, origin_note=f"base={base.id}"),
        label=pattern.source_class,
        verification=Verification.UNVERIFIED,
        base_id=base.id,
        recipe_id=recipe_id,
    )


def random_recipe(
    rng: random.Random,
    base_shape: tuple[int, int],
    base_subject_mask: np.ndarray,
    pattern: LesionPattern,
    complexion_shift: tuple[int, int, int] = (0, 0, 0),
) -> OverlayRecipe:
    """Sample a valid recipe: center on a subject pixel, scale capped to fit."""
    ys, xs = np.nonzero(base_subject_mask.astype(bool))
    if len(ys) == 0:
        raise EmptyMaskError("base subject mask is empty")
    i = rng.randrange(len(ys))
    bh, bw = base_shape
    center = (xs[i] / max(1, bw - 1), ys[i] / max(1, bh - 1))
    # Rotation with expand=True can grow the raster by up to sqrt(2).
    diag = math.hypot(pattern.width, pattern.height)
    max_scale = min(3.0, 0.95 * min(bh, bw) / diag)
    if max_scale < 0.1:  # recipe scale floor; the pattern cannot fit
        raise PatternLargerThanBaseError(
            f"pattern {pattern.width}x{pattern.height} cannot fit a "
            f"{bw}x{bh} base at any valid scale"
        )
    scale = rng.uniform(0.1, max(0.1, min(1.5, max_scale)))
    return OverlayRecipe(
        placement_center=center,
        scale=round(scale, 4),
        rotation=round(rng.uniform(0, 360), 2),
        complexion_shift=complexion_shift,
        flip_h=rng.random() < 0.5,
        flip_v=rng.random() < 0.5,
        recipe_id=f"{rng.randrange(16**12):012x}",
        seed=rng.randrange(2**31),
    )


def balance_classes(
    dataset: Dataset,
    bases: Sequence[ImageRecord],
    patterns: Sequence[LesionPattern],
    target: int,
    seed: int,
    images_root: str | Path,
    out_dir: str | Path,
    base_masks: Optional[dict[str, np.ndarray]] = None,
    complexion_weight: float = 0.5,
    feather_px: int = DEFAULT_FEATHER_PX,
) -> Dataset:
    """Top up every disease class to ``target`` records with new overlays.

    Original records are untouched; generated records are Unverified and must
    pass expert review before becoming training-eligible. ``base_masks`` maps
    base record id to its subject mask; bases without one are treated as
    all-subject.
    """
    counts = class_distribution(dataset)
    deficits = {}
    for cls in DiseaseClass:
        if cls is DiseaseClass.NON_DISEASED or counts[cls] == 0:
            continue  # absent classes have nothing to offset
        if counts[cls] > target:
            raise ValueError(
                f"target {target} below current count {counts[cls]} for {cls.value}"
            )
        if counts[cls] < target:
            deficits[cls] = target - counts[cls]

    rng = random.Random(seed)
    new_records: list[ImageRecord] = []
    for cls in DiseaseClass:
        if cls not in deficits:
            continue
        class_patterns = [p for p in patterns if p.source_class is cls]
        if not class_patterns:
            raise InsufficientSourcesError(cls.value, "no lesion patterns available")
        if not bases:
            raise InsufficientSourcesError(cls.value, "no non-diseased base images")
        for _ in range(deficits[cls]):
            base = bases[rng.randrange(len(bases))]
            pattern = class_patterns[rng.randrange(len(class_patterns))]
            base_pixels = load_rgb(Path(images_root) / base.path)
            mask = (base_masks or {}).get(base.id)
            if mask is None:
                mask = np.ones(base_pixels.shape[:2], dtype=bool)
            shift = complexion_shift_for(pattern, base_pixels, mask, complexion_weight)
            recipe = random_recipe(rng, base_pixels.shape[:2], mask, pattern, shift)
            new_records.append(
                compose_overlay(base, mask, pattern, recipe, images_root, out_dir, feather_px)
            )
    return Dataset(list(dataset.records) + new_records, dataset.manifest_version)


# --- per-epoch random transforms -------------------------------------------


@dataclass(frozen=True)
class TransformConfig:
    """Ranges for the online training-time augmentation draw.

    Ranges are symmetric around identity: ``rotation_range=15`` samples in
    [-15, 15] degrees, ``brightness_range=0.2`` samples a factor in
    [0.8, 1.2], and so on. Zero everywhere (the default) is the identity.
    """

    rotation_range: float = 0.0
    rescale_range: float = 0.0
    shift_range_x: float = 0.0
    shift_range_y: float = 0.0
    brightness_range: float = 0.0
    allow_flip_h: bool = False
    allow_flip_v: bool = False
    size_jitter: float = 0.0
    color_jitter: float = 0.0

    def __post_init__(self):
        for name in ("rotation_range", "rescale_range", "shift_range_x",
                     "shift_range_y", "brightness_range", "size_jitter", "color_jitter"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class TransformParams:
    rotation: float = 0.0
    zoom: float = 1.0
    shift_x: float = 0.0
    shift_y: float = 0.0
    brightness: float = 1.0
    flip_h: bool = False
    flip_v: bool = False
    size_factor: float = 1.0
    color_factors: tuple[float, float, float] = (1.0, 1.0, 1.0)


def sample_transform_params(config: TransformConfig, rng: random.Random) -> TransformParams:
    """Draw one parameter set; every value stays inside its configured range."""
    u = rng.uniform
    return TransformParams(
        rotation=u(-config.rotation_range, config.rotation_range),
        zoom=u(1 - config.rescale_range, 1 + config.rescale_range),
        shift_x=u(-config.shift_range_x, config.shift_range_x),
        shift_y=u(-config.shift_range_y, config.shift_range_y),
        brightness=u(1 - config.brightness_range, 1 + config.brightness_range),
        flip_h=config.allow_flip_h and rng.random() < 0.5,
        flip_v=config.allow_flip_v and rng.random() < 0.5,
        size_factor=u(1 - config.size_jitter, 1 + config.size_jitter),
        color_factors=(
            u(1 - config.color_jitter, 1 + config.color_jitter),
            u(1 - config.color_jitter, 1 + config.color_jitter),
            u(1 - config.color_jitter, 1 + config.color_jitter),
        ),
    )


def apply_transform_params(
    image: np.ndarray,
    params: TransformParams,
    output_size: Optional[tuple[int, int]] = None,
) -> np.ndarray:
    """Apply one sampled parameter set; identity params leave pixels untouched
    apart from the final resize to ``output_size``."""
    out = image
    if params.flip_h:
        out = out[:, ::-1]
    if params.flip_v:
        out = out[::-1, :]
    h, w = out.shape[:2]
    if params.rotation != 0.0:
        out = np.asarray(
            Image.fromarray(np.ascontiguousarray(out)).rotate(
                params.rotation, resample=Image.BILINEAR, expand=False
            )
        )
    if params.zoom != 1.0 or params.shift_x != 0.0 or params.shift_y != 0.0:
        # Inverse affine map (output -> input) with zoom about the center.
        z = params.zoom
        tx = params.shift_x * w
        ty = params.shift_y * h
        cx, cy = w / 2.0, h / 2.0
        matrix = (
            1 / z, 0.0, cx - (cx + tx) / z,
            0.0, 1 / z, cy - (cy + ty) / z,
        )
        out = np.asarray(
            Image.fromarray(np.ascontiguousarray(out)).transform(
                (w, h), Image.AFFINE, matrix, resample=Image.BILINEAR, fillcolor=0
            )
        )
    if params.size_factor != 1.0:
        jw = max(1, int(round(w * params.size_factor)))
        jh = max(1, int(round(h * params.size_factor)))
        out = np.asarray(
            Image.fromarray(np.ascontiguousarray(out)).resize((jw, jh), Image.BILINEAR)
        )
    scale = np.asarray(params.brightness) * np.asarray(params.color_factors)
    if not np.allclose(scale, 1.0):
        out = np.clip(out.astype(np.float64) * scale, 0, 255).astype(np.uint8)
    if output_size is None:
        output_size = (w, h)
    oh, ow = out.shape[:2]
    if (ow, oh) != output_size:
        out = np.asarray(
            Image.fromarray(np.ascontiguousarray(out)).resize(output_size, Image.BILINEAR)
        )
    return np.ascontiguousarray(out)


def random_transform(
    image: np.ndarray,
    config: TransformConfig,
    seed: int,
    output_size: Optional[tuple[int, int]] = None,
) -> np.ndarray:
    """Seeded random transform: deterministic for fixed (image, config, seed)."""
    params = sample_transform_params(config, random.Random(seed))
    return apply_transform_params(image, params, output_size)


class PatternGenerator:
    """Source of lesion patterns for augmentation.

    The deterministic extractor below is the only shipped implementation;
    generative (GAN-style) pattern synthesis can plug in behind the same
    interface.
    """

    def patterns_for(self, cls: DiseaseClass) -> list[LesionPattern]:
        raise NotImplementedError


class ExtractedPatternLibrary(PatternGenerator):
    """Patterns extracted from labeled images with lesion masks."""

    def __init__(self, patterns: Sequence[LesionPattern]):
        self._patterns = list(patterns)

    @classmethod
    def from_dataset(cls, dataset: Dataset, images_root: str | Path) -> "ExtractedPatternLibrary":
        """Extract a pattern from every diseased record carrying a lesion mask
        (manifest key ``lesion_mask_path``; ``mask_path`` is the subject mask)."""
        from .imaging import load_mask_png

        patterns = []
        for rec in dataset.records:
            if rec.label is None or rec.label is DiseaseClass.NON_DISEASED:
                continue
            lesion_rel = rec.extras.get("lesion_mask_path")
            if lesion_rel is None:
                continue
            image = load_rgb(Path(images_root) / rec.path)
            mask = load_mask_png(Path(images_root) / lesion_rel)
            pattern = extract_pattern(image, mask, rec.label)
            patterns.append(
                LesionPattern(pattern.pixels, pattern.source_class, rec.id, pattern.mean_color)
            )
        return cls(patterns)

    @property
    def patterns(self) -> list[LesionPattern]:
        return list(self._patterns)

    def patterns_for(self, cls: DiseaseClass) -> list[LesionPattern]:
        return [p for p in self._patterns if p.source_class is cls]
