"""Six-class disease classifier.

Two backbones: the Inception-ResNet v2 architecture (canonical 299x299 input)
for production training, and a three-block SmallCNN so tests and desk-scale
experiments run on CPU in minutes. Training uses Adam with the project
defaults lr=0.01 and epsilon=0.1 and 150 passes over the training set.

Model artifacts are a weights file plus a JSON sidecar (class order, config,
dataset hash) and a CSV epoch log.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import zlib
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .augment import TransformConfig, random_transform
from .errors import (
    EmptyTrainingSetError,
    ModelError,
    ModelNotLoadedError,
    UnlabeledRecordError,
    UnverifiedAugmentedRecordError,
)
from .imaging import load_rgb, resize_rgb
from .manifest import CLASS_ORDER, Dataset, DiseaseClass

WEIGHTS_FILE = "classifier.pt"
SIDECAR_FILE = "classifier.json"
EPOCH_LOG_FILE = "epoch_log.csv"


class Backbone(Enum):
    INCEPTION_RESNET_V2 = "inception_resnet_v2"
    SMALL_CNN = "small_cnn"


_DEFAULT_INPUT_SIZE = {
    Backbone.INCEPTION_RESNET_V2: 299,
    Backbone.SMALL_CNN: 64,
}


@dataclass(frozen=True)
class ClsModelConfig:
    backbone: Backbone = Backbone.INCEPTION_RESNET_V2
    input_size: Optional[int] = None  # backbone default when None
    epochs: int = 150
    optimizer_lr: float = 0.01
    optimizer_epsilon: float = 0.1
    batch_size: int = 16
    seed: int = 0
    pretrained: bool = True
    pretrained_weights: Optional[str] = None
    freeze_backbone: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.optimizer_lr <= 0 or self.optimizer_epsilon <= 0:
            raise ValueError("optimizer_lr and optimizer_epsilon must be positive")

    @property
    def resolved_input_size(self) -> int:
        return self.input_size or _DEFAULT_INPUT_SIZE[self.backbone]


@dataclass(frozen=True)
class ClassProbabilities:
    probs: dict[DiseaseClass, float]
    predicted: DiseaseClass

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "ClassProbabilities":
        """Build from a probability vector in canonical class order.

        Argmax ties break toward the earlier class in the canonical order
        (np.argmax returns the first maximum).
        """
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (len(CLASS_ORDER),):
            raise ValueError(f"expected {len(CLASS_ORDER)} probabilities, got {vec.shape}")
        if not np.isfinite(vec).all() or (vec < 0).any():
            raise ValueError("probabilities must be finite and non-negative")
        if abs(float(vec.sum()) - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {vec.sum()}, not 1")
        return cls(
            probs={c: float(v) for c, v in zip(CLASS_ORDER, vec)},
            predicted=CLASS_ORDER[int(np.argmax(vec))],
        )

    def vector(self) -> np.ndarray:
        return np.array([self.probs[c] for c in CLASS_ORDER])


def softmax_probabilities(logits: Sequence[float]) -> ClassProbabilities:
    """Numerically stable softmax over canonical-order logits."""
    arr = np.asarray(logits, dtype=np.float64)
    arr = arr - arr.max()
    exp = np.exp(arr)
    return ClassProbabilities.from_vector(exp / exp.sum())


# --- backbones --------------------------------------------------------------


class SmallCNN(nn.Module):
    """Three conv blocks + GAP head; enough capacity for desk-scale data.

    Norm-free on purpose: batch statistics drift badly between augmented
    training batches and clean single-image inference at this data scale.
    The global max-pool head suits localized evidence (a lesion occupies a
    small fraction of the frame) far better than average pooling.
    """

    def __init__(self, num_classes: int = len(CLASS_ORDER)):
        super().__init__()
        def block(cin, cout):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(2),
            )
        self.features = nn.Sequential(block(3, 16), block(16, 32), block(32, 64))
        self.pool = nn.AdaptiveMaxPool2d(1)
        self.fc = nn.Linear(64, num_classes)

    @property
    def last_conv_layer(self) -> nn.Module:
        return self.features[-1]

    def forward(self, x):
        x = self.pool(self.features(x)).flatten(1)
        return self.fc(x)


class _ConvBN(nn.Module):
    def __init__(self, cin, cout, kernel, stride=1, padding=0):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, kernel, stride=stride, padding=padding, bias=False)
        self.bn = nn.BatchNorm2d(cout, eps=0.001)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.relu(self.bn(self.conv(x)))


class _Stem(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = nn.Sequential(
            _ConvBN(3, 32, 3, stride=2),
            _ConvBN(32, 32, 3),
            _ConvBN(32, 64, 3, padding=1),
        )
        self.pool1 = nn.MaxPool2d(3, stride=2)
        self.conv2 = nn.Sequential(_ConvBN(64, 80, 1), _ConvBN(80, 192, 3))
        self.pool2 = nn.MaxPool2d(3, stride=2)

    def forward(self, x):
        return self.pool2(self.conv2(self.pool1(self.conv(x))))


class _Mixed5b(nn.Module):
    def __init__(self):
        super().__init__()
        self.b0 = _ConvBN(192, 96, 1)
        self.b1 = nn.Sequential(_ConvBN(192, 48, 1), _ConvBN(48, 64, 5, padding=2))
        self.b2 = nn.Sequential(
            _ConvBN(192, 64, 1),
            _ConvBN(64, 96, 3, padding=1),
            _ConvBN(96, 96, 3, padding=1),
        )
        self.b3 = nn.Sequential(
            nn.AvgPool2d(3, stride=1, padding=1, count_include_pad=False),
            _ConvBN(192, 64, 1),
        )

    def forward(self, x):
        return torch.cat([self.b0(x), self.b1(x), self.b2(x), self.b3(x)], 1)


class _Block35(nn.Module):
    def __init__(self, scale=0.17):
        super().__init__()
        self.scale = scale
        self.b0 = _ConvBN(320, 32, 1)
        self.b1 = nn.Sequential(_ConvBN(320, 32, 1), _ConvBN(32, 32, 3, padding=1))
        self.b2 = nn.Sequential(
            _ConvBN(320, 32, 1),
            _ConvBN(32, 48, 3, padding=1),
            _ConvBN(48, 64, 3, padding=1),
        )
        self.up = nn.Conv2d(128, 320, 1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        branch = torch.cat([self.b0(x), self.b1(x), self.b2(x)], 1)
        return self.relu(x + self.scale * self.up(branch))


class _Mixed6a(nn.Module):
    def __init__(self):
        super().__init__()
        self.b0 = _ConvBN(320, 384, 3, stride=2)
        self.b1 = nn.Sequential(
            _ConvBN(320, 256, 1),
            _ConvBN(256, 256, 3, padding=1),
            _ConvBN(256, 384, 3, stride=2),
        )
        self.pool = nn.MaxPool2d(3, stride=2)

    def forward(self, x):
        return torch.cat([self.b0(x), self.b1(x), self.pool(x)], 1)


class _Block17(nn.Module):
    def __init__(self, scale=0.10):
        super().__init__()
        self.scale = scale
        self.b0 = _ConvBN(1088, 192, 1)
        self.b1 = nn.Sequential(
            _ConvBN(1088, 128, 1),
            _ConvBN(128, 160, (1, 7), padding=(0, 3)),
            _ConvBN(160, 192, (7, 1), padding=(3, 0)),
        )
        self.up = nn.Conv2d(384, 1088, 1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        branch = torch.cat([self.b0(x), self.b1(x)], 1)
        return self.relu(x + self.scale * self.up(branch))


class _Mixed7a(nn.Module):
    def __init__(self):
        super().__init__()
        self.b0 = nn.Sequential(_ConvBN(1088, 256, 1), _ConvBN(256, 384, 3, stride=2))
        self.b1 = nn.Sequential(_ConvBN(1088, 256, 1), _ConvBN(256, 288, 3, stride=2))
        self.b2 = nn.Sequential(
            _ConvBN(1088, 256, 1),
            _ConvBN(256, 288, 3, padding=1),
            _ConvBN(288, 320, 3, stride=2),
        )
        self.pool = nn.MaxPool2d(3, stride=2)

    def forward(self, x):
        return torch.cat([self.b0(x), self.b1(x), self.b2(x), self.pool(x)], 1)


class _Block8(nn.Module):
    def __init__(self, scale=0.20, activation=True):
        super().__init__()
        self.scale = scale
        self.activation = activation
        self.b0 = _ConvBN(2080, 192, 1)
        self.b1 = nn.Sequential(
            _ConvBN(2080, 192, 1),
            _ConvBN(192, 224, (1, 3), padding=(0, 1)),
            _ConvBN(224, 256, (3, 1), padding=(1, 0)),
        )
        self.up = nn.Conv2d(448, 2080, 1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        branch = torch.cat([self.b0(x), self.b1(x)], 1)
        out = x + self.scale * self.up(branch)
        return self.relu(out) if self.activation else out


class InceptionResNetV2(nn.Module):
    """Inception-ResNet v2: residual inception blocks with scaled shortcuts."""

    def __init__(self, num_classes: int = len(CLASS_ORDER)):
        super().__init__()
        self.features = nn.Sequential(
            _Stem(),
            _Mixed5b(),
            *[_Block35() for _ in range(10)],
            _Mixed6a(),
            *[_Block17() for _ in range(20)],
            _Mixed7a(),
            *[_Block8() for _ in range(9)],
            _Block8(scale=1.0, activation=False),
            _ConvBN(2080, 1536, 1),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(1536, num_classes)

    @property
    def last_conv_layer(self) -> nn.Module:
        return self.features[-1]

    def forward(self, x):
        x = self.pool(self.features(x)).flatten(1)
        return self.fc(x)


def build_backbone(config: ClsModelConfig) -> nn.Module:
    if config.backbone is Backbone.SMALL_CNN:
        return SmallCNN()
    net = InceptionResNetV2()
    if config.pretrained:
        if not config.pretrained_weights:
            raise ModelError(
                "pretrained=True requires pretrained_weights (a local state-dict "
                "path); no weights are bundled with this package"
            )
        state = torch.load(config.pretrained_weights, map_location="cpu", weights_only=True)
        state = {k: v for k, v in state.items() if not k.startswith("fc.")}
        net.load_state_dict(state, strict=False)
    return net


# --- model wrapper -----------------------------------------------------------


@dataclass
class ClsModel:
    net: nn.Module
    config: ClsModelConfig
    class_order: tuple[DiseaseClass, ...] = CLASS_ORDER
    epoch_log: list[dict] = field(default_factory=list)
    dataset_hash: str = ""

    def __post_init__(self):
        self.net.eval()

    def _to_tensor(self, images: Sequence[np.ndarray]) -> torch.Tensor:
        size = self.config.resolved_input_size
        batch = np.stack([resize_rgb(img, (size, size)) for img in images])
        return torch.from_numpy(batch).permute(0, 3, 1, 2).float() / 255.0


def classify(model: ClsModel, image: np.ndarray) -> ClassProbabilities:
    """Probability over the six classes; deterministic for a fixed model."""
    return classify_batch(model, [image])[0]


@torch.no_grad()
def classify_batch(model: ClsModel, images: Sequence[np.ndarray]) -> list[ClassProbabilities]:
    if model is None or model.net is None:
        raise ModelNotLoadedError("classification model not loaded")
    model.net.eval()
    logits = model.net(model._to_tensor(images))
    return [softmax_probabilities(row.numpy()) for row in logits]


# --- training ----------------------------------------------------------------


def _derived_seed(seed: int, epoch: int, record_id: str) -> int:
    return zlib.crc32(f"{seed}:{epoch}:{record_id}".encode()) & 0x7FFFFFFF


def _check_train_dataset(train: Dataset) -> None:
    if len(train) == 0:
        raise EmptyTrainingSetError("empty training dataset")
    for rec in train.records:
        if rec.label is None:
            raise UnlabeledRecordError(rec.id)
        if rec.is_augmented and not rec.training_eligible:
            raise UnverifiedAugmentedRecordError(rec.id)


def train_classifier(
    train: Dataset,
    config: ClsModelConfig,
    transforms: TransformConfig,
    images_root: str | Path,
) -> ClsModel:
    """Train on the manifest's records with online random augmentation.

    The sampler owns the order: records are canonicalized by id before the
    seeded per-epoch shuffle, so manifest order never changes the result.
    """
    _check_train_dataset(train)
    random.seed(config.seed)
    np.random.seed(config.seed)
    torch.manual_seed(config.seed)
    if config.deterministic:
        torch.use_deterministic_algorithms(True)

    records = sorted(train.records, key=lambda r: r.id)
    size = config.resolved_input_size
    images = [load_rgb(Path(images_root) / rec.path) for rec in records]
    labels = torch.tensor([CLASS_ORDER.index(rec.label) for rec in records])
    dataset_hash = hashlib.sha256(
        "\n".join(r.id for r in records).encode()
    ).hexdigest()

    net = build_backbone(config)
    if config.freeze_backbone:
        for param in net.features.parameters():
            param.requires_grad = False
    net.train()
    optimizer = torch.optim.Adam(
        (p for p in net.parameters() if p.requires_grad),
        lr=config.optimizer_lr,
        eps=config.optimizer_epsilon,
    )
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(config.seed)

    n = len(records)
    epoch_log: list[dict] = []
    for epoch in range(config.epochs):
        order = order_rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = np.stack([
                random_transform(
                    images[i], transforms, _derived_seed(config.seed, epoch, records[i].id),
                    output_size=(size, size),
                )
                for i in idx
            ])
            xb = torch.from_numpy(batch).permute(0, 3, 1, 2).float() / 255.0
            yb = labels[idx]
            optimizer.zero_grad()
            logits = net(xb)
            loss = loss_fn(logits, yb)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(idx)
            correct += int((logits.argmax(1) == yb).sum())
        epoch_log.append(
            {"epoch": epoch + 1, "loss": total_loss / n, "accuracy": correct / n}
        )
    return ClsModel(net, config, CLASS_ORDER, epoch_log, dataset_hash)


# --- persistence --------------------------------------------------------------


def save_classifier(model: ClsModel, model_dir: str | Path) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    weights_path = model_dir / WEIGHTS_FILE
    torch.save(model.net.state_dict(), weights_path)
    log_path = model_dir / EPOCH_LOG_FILE
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "accuracy"])
        writer.writeheader()
        writer.writerows(model.epoch_log)
    config = asdict(model.config)
    config["backbone"] = model.config.backbone.value
    sidecar = {
        "class_order": [c.value for c in model.class_order],
        "config": config,
        "dataset_hash": model.dataset_hash,
        "epoch_log_path": EPOCH_LOG_FILE,
        "weights_sha256": hashlib.sha256(weights_path.read_bytes()).hexdigest(),
    }
    (model_dir / SIDECAR_FILE).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def load_classifier(model_dir: str | Path) -> ClsModel:
    model_dir = Path(model_dir)
    sidecar_path = model_dir / SIDECAR_FILE
    weights_path = model_dir / WEIGHTS_FILE
    if not sidecar_path.exists() or not weights_path.exists():
        raise ModelNotLoadedError(f"no classifier artifact in {model_dir}")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    raw = dict(sidecar["config"])
    raw["backbone"] = Backbone(raw["backbone"])
    raw["pretrained"] = False  # weights come from the artifact itself
    config = ClsModelConfig(**raw)
    net = build_backbone(config)
    net.load_state_dict(torch.load(weights_path, map_location="cpu", weights_only=True))
    class_order = tuple(DiseaseClass(v) for v in sidecar["class_order"])
    if class_order != CLASS_ORDER:
        raise ModelError("artifact class order does not match canonical order")
    epoch_log: list[dict] = []
    log_path = model_dir / sidecar.get("epoch_log_path", EPOCH_LOG_FILE)
    if log_path.exists():
        with open(log_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                epoch_log.append(
                    {"epoch": int(row["epoch"]), "loss": float(row["loss"]),
                     "accuracy": float(row["accuracy"])}
                )
    return ClsModel(net, config, class_order, epoch_log, sidecar.get("dataset_hash", ""))
