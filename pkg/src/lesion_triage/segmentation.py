"""Binary background-vs-subject segmentation with a U-Net encoder-decoder.

The network predicts a per-pixel subject probability; ``segment`` thresholds
at 0.5 and returns a mask at the source image's resolution. Model artifacts
are a single weights file plus a JSON sidecar carrying the config and a hash
of the weights.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .errors import (
    DimensionMismatchError,
    EmptyTrainingSetError,
    ModelNotLoadedError,
    NonBinaryMaskError,
)
from .imaging import resize_mask, resize_rgb

WEIGHTS_FILE = "segmenter.pt"
SIDECAR_FILE = "segmenter.json"


@dataclass(frozen=True)
class SegmentationMask:
    pixels: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.pixels.dtype != np.bool_:
            raise NonBinaryMaskError("mask pixels must be boolean")

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class SegModelConfig:
    input_size: int = 256
    depth: int = 4
    base_channels: int = 16
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 8
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.input_size % (2 ** self.depth) != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by 2^depth {2 ** self.depth}"
            )


class _DoubleConv(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet(nn.Module):
    def __init__(self, depth: int = 4, base_channels: int = 16):
        super().__init__()
        chans = [base_channels * (2 ** i) for i in range(depth + 1)]
        self.downs = nn.ModuleList()
        in_ch = 3
        for ch in chans[:-1]:
            self.downs.append(_DoubleConv(in_ch, ch))
            in_ch = ch
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _DoubleConv(chans[-2], chans[-1])
        self.ups = nn.ModuleList()
        self.up_convs = nn.ModuleList()
        for ch in reversed(chans[:-1]):
            self.ups.append(nn.ConvTranspose2d(ch * 2, ch, 2, stride=2))
            self.up_convs.append(_DoubleConv(ch * 2, ch))
        self.head = nn.Conv2d(chans[0], 1, 1)

    def forward(self, x):
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, conv, skip in zip(self.ups, self.up_convs, reversed(skips)):
            x = up(x)
            x = conv(torch.cat([skip, x], dim=1))
        return self.head(x)


class SegModel:
    """Trained segmenter: immutable after construction, safe for concurrent use."""

    def __init__(self, net: UNet, config: SegModelConfig, epoch_losses: list[float]):
        self.net = net.eval()
        self.config = config
        self.epoch_losses = epoch_losses

    @torch.no_grad()
    def predict_proba(self, image: np.ndarray) -> np.ndarray:
        """Subject probability map at the source image's resolution."""
        h, w = image.shape[:2]
        size = self.config.input_size
        resized = resize_rgb(image, (size, size))
        x = torch.from_numpy(resized.copy()).permute(2, 0, 1).float().unsqueeze(0) / 255.0
        logits = self.net(x)
        probs = torch.sigmoid(logits)
        probs = nn.functional.interpolate(
            probs, size=(h, w), mode="bilinear", align_corners=False
        )
        return probs[0, 0].numpy()


def _seed_everything(seed: int, deterministic: bool) -> np.random.Generator:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
    return np.random.default_rng(seed)


def _validate_pairs(train_pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> None:
    if not train_pairs:
        raise EmptyTrainingSetError("no training pairs")
    for i, (image, mask) in enumerate(train_pairs):
        if image.shape[:2] != mask.shape:
            raise DimensionMismatchError(f"pair {i}: image {image.shape[:2]} vs mask {mask.shape}")
        values = np.unique(mask)
        if not np.isin(values, (0, 1)).all():
            raise NonBinaryMaskError(f"pair {i}: mask values outside {{0, 1}}")


def train_segmenter(
    train_pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    config: SegModelConfig,
) -> SegModel:
    """Train on (image, mask) pairs with pixelwise binary cross-entropy."""
    _validate_pairs(train_pairs)
    rng = _seed_everything(config.seed, config.deterministic)

    size = config.input_size
    images = np.stack([resize_rgb(img, (size, size)) for img, _ in train_pairs])
    masks = np.stack([
        resize_mask(mask.astype(bool), (size, size)) for _, mask in train_pairs
    ])
    x_all = torch.from_numpy(images).permute(0, 3, 1, 2).float() / 255.0
    y_all = torch.from_numpy(masks).float().unsqueeze(1)

    net = UNet(config.depth, config.base_channels)
    net.train()
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    loss_fn = nn.BCEWithLogitsLoss()

    n = len(train_pairs)
    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x_all[idx], y_all[idx]
            optimizer.zero_grad()
            loss = loss_fn(net(xb), yb)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        epoch_losses.append(total / n)
    return SegModel(net, config, epoch_losses)


def segment(model: SegModel, image: np.ndarray) -> SegmentationMask:
    """Binary subject mask (probability >= 0.5) at the input's dimensions."""
    if model is None or model.net is None:
        raise ModelNotLoadedError("segmentation model not loaded")
    probs = model.predict_proba(image)
    return SegmentationMask(probs >= 0.5)


def mask_iou(a: SegmentationMask, b: SegmentationMask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(f"{a.pixels.shape} vs {b.pixels.shape}")
    union = np.logical_or(a.pixels, b.pixels).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(a.pixels, b.pixels).sum()
    return float(inter / union)


def save_segmenter(model: SegModel, model_dir: str | Path) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    weights_path = model_dir / WEIGHTS_FILE
    torch.save(model.net.state_dict(), weights_path)
    sidecar = {
        "config": asdict(model.config),
        "epoch_losses": model.epoch_losses,
        "weights_sha256": hashlib.sha256(weights_path.read_bytes()).hexdigest(),
    }
    (model_dir / SIDECAR_FILE).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def load_segmenter(model_dir: str | Path) -> SegModel:
    model_dir = Path(model_dir)
    sidecar_path = model_dir / SIDECAR_FILE
    weights_path = model_dir / WEIGHTS_FILE
    if not sidecar_path.exists() or not weights_path.exists():
        raise ModelNotLoadedError(f"no segmenter artifact in {model_dir}")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    config = SegModelConfig(**sidecar["config"])
    net = UNet(config.depth, config.base_channels)
    net.load_state_dict(torch.load(weights_path, map_location="cpu", weights_only=True))
    return SegModel(net, config, sidecar.get("epoch_losses", []))
