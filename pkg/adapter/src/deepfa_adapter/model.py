"""CNN architectures and the model directory layout.

A model directory holds ``weights.pt`` plus ``manifest.json`` recording the
class list, input geometry (H, W, C), architecture, seed, and the engine
protocol version. Features handed back to the engine are the flattened
activations of the network's last max-pooling layer.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import torch
from torch import nn

from . import PROTOCOL_VERSION


class CompactNet(nn.Module):
    """Small convolutional stack for desk-scale runs.

    conv-relu-conv-relu-pool, conv-relu-pool; the second pool is the last
    max-pooling layer whose flattened output is the feature vector.
    """

    def __init__(self, channels: int, height: int, width: int, n_classes: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(channels, 16, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2, ceil_mode=True),
            nn.Conv2d(32, 32, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2, ceil_mode=True),
        )
        h = math.ceil(math.ceil(height / 2) / 2)
        w = math.ceil(math.ceil(width / 2) / 2)
        self.feature_dim = 32 * h * w
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(self.feature_dim, 64),
            nn.ReLU(inplace=True),
            nn.Linear(64, n_classes),
        )

    def pooled_features(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.features(x), 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))


class Vgg16Net(nn.Module):
    """VGG-16 convolutional stack with a fresh classification head.

    The torchvision conv stack ends in a max-pooling layer; its flattened
    output is the feature vector. Pretrained ImageNet weights are loaded
    when requested (requires download access or a warm torch hub cache).
    """

    def __init__(self, channels: int, height: int, width: int, n_classes: int,
                 pretrained: bool = False):
        super().__init__()
        try:
            from torchvision.models import VGG16_Weights, vgg16
        except ImportError as exc:  # torchvision is an optional extra
            raise RuntimeError("vgg16 architecture requires torchvision") from exc
        weights = VGG16_Weights.IMAGENET1K_V1 if pretrained else None
        base = vgg16(weights=weights)
        self.features = base.features
        if channels != 3:
            # widen/narrow the first conv for non-RGB inputs
            first = nn.Conv2d(channels, 64, 3, padding=1)
            self.features[0] = first
        with torch.no_grad():
            probe = torch.zeros(1, channels, height, width)
            self.feature_dim = int(torch.flatten(self.features(probe), 1).shape[1])
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(self.feature_dim, 256),
            nn.ReLU(inplace=True),
            nn.Linear(256, n_classes),
        )

    def pooled_features(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.features(x), 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))


ARCHS = {"compact": CompactNet, "vgg16": Vgg16Net}


def build_model(arch: str, channels: int, height: int, width: int,
                n_classes: int, pretrained: bool = False) -> nn.Module:
    if arch not in ARCHS:
        raise ValueError(f"unknown architecture {arch!r}")
    if arch == "vgg16":
        return Vgg16Net(channels, height, width, n_classes, pretrained=pretrained)
    return CompactNet(channels, height, width, n_classes)


def infer_geometry(d: int, spec: str | None) -> tuple[int, int, int]:
    """(H, W, C) for flat feature rows of width ``d``.

    Explicit ``HxWxC`` specs win; otherwise square grayscale (d = s^2) and
    square RGB (d = 3 s^2) are recognized.
    """
    if spec:
        parts = spec.lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"geometry must be HxWxC, got {spec!r}")
        h, w, c = (int(p) for p in parts)
        if h * w * c != d:
            raise ValueError(f"geometry {spec} does not match feature width {d}")
        return h, w, c
    side = math.isqrt(d)
    if side * side == d:
        return side, side, 1
    if d % 3 == 0:
        side = math.isqrt(d // 3)
        if 3 * side * side == d:
            return side, side, 3
    raise ValueError(
        f"cannot infer an image geometry from feature width {d}; pass --geometry")


def save_model(model_dir: str | Path, model: nn.Module, *, arch: str,
               classes: list[str], geometry: tuple[int, int, int],
               seed: int) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), model_dir / "weights.pt")
    manifest = {
        "protocol_version": PROTOCOL_VERSION,
        "arch": arch,
        "classes": classes,
        "geometry": list(geometry),
        "seed": seed,
    }
    (model_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_model(model_dir: str | Path) -> tuple[nn.Module, dict]:
    model_dir = Path(model_dir)
    manifest_path = model_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{model_dir}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("protocol_version") != PROTOCOL_VERSION:
        raise ValueError(
            f"{model_dir}: protocol version {manifest.get('protocol_version')} "
            f"is not supported (need {PROTOCOL_VERSION})")
    h, w, c = manifest["geometry"]
    model = build_model(manifest["arch"], c, h, w, len(manifest["classes"]))
    state = torch.load(model_dir / "weights.pt", map_location="cpu",
                       weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, manifest
