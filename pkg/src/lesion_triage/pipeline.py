"""Saliency-guided inference pipeline.

One pass runs: segment -> classify -> GradCAM++ on the predicted class ->
salient bounding box (intersected with the subject mask) -> crop with
background zeroed -> classify again. The refined prediction is the final
answer; the full stage trace is returned for observability.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .classification import ClassProbabilities, ClsModel, classify
from .errors import (
    DimensionMismatchError,
    EmptySubjectMaskError,
    ModelNotLoadedError,
    NoConvLayerError,
    PipelineStageError,
)
from .imaging import resize_rgb
from .manifest import CLASS_ORDER, DiseaseClass
from .segmentation import SegmentationMask, SegModel, segment

DEFAULT_SALIENCY_THRESHOLD = 0.5
BBOX_MARGIN = 0.10
OVERLAY_OPACITY = 0.4

STAGE_NAMES = ("segment", "classify_initial", "saliency", "bbox", "crop", "classify_refined")


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel relevance in [0, 1]; max-normalized unless degenerate (all zero)."""

    values: np.ndarray  # (H, W) float32

    def __post_init__(self):
        v = self.values
        if v.min() < 0 or v.max() > 1:
            raise ValueError("saliency values must lie in [0, 1]")

    @property
    def width_px(self) -> int:
        return self.values.shape[1]

    @property
    def height_px(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: x0 <= x < x1, y0 <= y < y1."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate bbox {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


@dataclass(frozen=True)
class StageTiming:
    name: str
    seconds: float


@dataclass(frozen=True)
class ClassificationResult:
    initial: ClassProbabilities
    saliency: SaliencyMap
    bbox: BBox
    refined: ClassProbabilities
    final_class: DiseaseClass
    stages: tuple[StageTiming, ...]


def _find_last_conv(net: nn.Module) -> nn.Module:
    layer = getattr(net, "last_conv_layer", None)
    if layer is not None:
        return layer
    last = None
    for module in net.modules():
        if isinstance(module, nn.Conv2d):
            last = module
    if last is None:
        raise NoConvLayerError("model has no convolutional layer")
    return last


def gradcam_pp(model: ClsModel, image: np.ndarray, target_class: DiseaseClass) -> SaliencyMap:
    """GradCAM++ relevance map for ``target_class`` at the image's resolution.

    Channel weights are the alpha-weighted positive gradients of the class
    score over the last conv layer's activations; the weighted activation sum
    is ReLU-rectified, upsampled, and normalized by its max (an all-zero map
    is returned for the degenerate zero-gradient case).
    """
    if model is None or model.net is None:
        raise ModelNotLoadedError("classification model not loaded")
    net = model.net
    net.eval()
    target_layer = _find_last_conv(net)

    activations: list[torch.Tensor] = []
    gradients: list[torch.Tensor] = []

    def fwd_hook(_module, _inp, out):
        activations.append(out)

    def bwd_hook(_module, _grad_in, grad_out):
        gradients.append(grad_out[0])

    h1 = target_layer.register_forward_hook(fwd_hook)
    h2 = target_layer.register_full_backward_hook(bwd_hook)
    try:
        x = model._to_tensor([image])
        net.zero_grad(set_to_none=True)
        logits = net(x)
        score = logits[0, CLASS_ORDER.index(target_class)]
        score.backward()
    finally:
        h1.remove()
        h2.remove()

    a = activations[-1][0].detach()  # (C, h, w)
    g = gradients[-1][0].detach()

    g2 = g * g
    g3 = g2 * g
    denom = 2.0 * g2 + (a * g3).sum(dim=(1, 2), keepdim=True)
    alpha = g2 / torch.where(denom != 0, denom, torch.ones_like(denom))
    weights = (alpha * torch.relu(g)).sum(dim=(1, 2))  # (C,)
    cam = torch.relu((weights[:, None, None] * a).sum(dim=0))

    h, w = image.shape[:2]
    cam = nn.functional.interpolate(
        cam[None, None], size=(h, w), mode="bilinear", align_corners=False
    )[0, 0]
    peak = float(cam.max())
    if peak > 0:
        cam = cam / peak
    values = cam.numpy().astype(np.float32)
    return SaliencyMap(np.clip(values, 0.0, 1.0))


def salient_bbox(
    saliency: SaliencyMap,
    threshold: float,
    subject_mask: SegmentationMask,
) -> BBox:
    """Tight box of (saliency >= threshold * max) AND subject pixels.

    Falls back to the subject mask's own box when the intersection is empty,
    then expands by a 10% margin per side, clipped to image bounds.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    if saliency.values.shape != subject_mask.pixels.shape:
        raise DimensionMismatchError(
            f"saliency {saliency.values.shape} vs mask {subject_mask.pixels.shape}"
        )
    mask = subject_mask.pixels
    if not mask.any():
        raise EmptySubjectMaskError("subject mask is empty")
    peak = float(saliency.values.max())
    selected = (saliency.values >= threshold * peak) & mask if peak > 0 else np.zeros_like(mask)
    if not selected.any():
        selected = mask
    rows = np.flatnonzero(selected.any(axis=1))
    cols = np.flatnonzero(selected.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1]) + 1
    x0, x1 = int(cols[0]), int(cols[-1]) + 1

    h, w = mask.shape
    mx = int(round(BBOX_MARGIN * (x1 - x0)))
    my = int(round(BBOX_MARGIN * (y1 - y0)))
    return BBox(
        x0=max(0, x0 - mx),
        y0=max(0, y0 - my),
        x1=min(w, x1 + mx),
        y1=min(h, y1 + my),
    )


def refine_and_classify(
    seg: SegModel,
    cls: ClsModel,
    image: np.ndarray,
    threshold: float = DEFAULT_SALIENCY_THRESHOLD,
) -> ClassificationResult:
    """Full triage pass over one image; never mutates the input raster."""
    stages: list[StageTiming] = []

    def run(stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise PipelineStageError(stage, exc) from exc
        stages.append(StageTiming(stage, time.perf_counter() - start))
        return result

    mask = run("segment", lambda: segment(seg, image))
    initial = run("classify_initial", lambda: classify(cls, image))
    saliency = run("saliency", lambda: gradcam_pp(cls, image, initial.predicted))
    box = run("bbox", lambda: salient_bbox(saliency, threshold, mask))

    def crop():
        region = image[box.y0 : box.y1, box.x0 : box.x1].copy()
        region_mask = mask.pixels[box.y0 : box.y1, box.x0 : box.x1]
        region[~region_mask] = 0
        return region

    cropped = run("crop", crop)
    refined = run("classify_refined", lambda: classify(cls, cropped))

    return ClassificationResult(
        initial=initial,
        saliency=saliency,
        bbox=box,
        refined=refined,
        final_class=refined.predicted,
        stages=tuple(stages),
    )


# --- saliency overlay export -------------------------------------------------


def _heat_rgb(values: np.ndarray) -> np.ndarray:
    """Blue -> cyan -> yellow -> red colormap over [0, 1]."""
    v = np.clip(values, 0.0, 1.0)
    r = np.clip(2.0 * v - 0.5, 0, 1)
    g = 1.0 - np.abs(2.0 * v - 1.0) * 0.8
    b = np.clip(1.0 - 2.0 * v, 0, 1)
    return (np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


def saliency_overlay(
    image: np.ndarray,
    saliency: SaliencyMap,
    opacity: float = OVERLAY_OPACITY,
) -> np.ndarray:
    """Heatmap blended onto the image at fixed opacity, for UI display."""
    if image.shape[:2] != saliency.values.shape:
        image = resize_rgb(image, (saliency.width_px, saliency.height_px))
    heat = _heat_rgb(saliency.values)
    blended = (1.0 - opacity) * image.astype(np.float64) + opacity * heat.astype(np.float64)
    return np.rint(blended).astype(np.uint8)
