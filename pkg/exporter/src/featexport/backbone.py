"""Backbone construction and first-dense-layer activation capture.

Two backbones ship: the standard VGG16 feature extractor with a replaced
dense head, and a structurally similar tiny network for fast smoke tests.
The exported vector is always the output of the head's first Linear layer,
and its width is read off the instantiated layer, never assumed.
"""
from __future__ import annotations

import torch
from torch import nn
from torchvision import models

BACKBONES = ("vgg16", "tiny")


class BackboneError(RuntimeError):
    """Backbone construction or weight loading failed."""


def _head(in_features: int, width: int, dropout: float, classes: int = 2) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_features, width),
        nn.ReLU(inplace=True),
        nn.Dropout(dropout),
        nn.Linear(width, classes),
    )


class TinyBackbone(nn.Module):
    """Three small conv blocks and a dense head; 32x32 input."""

    input_size = 32

    def __init__(self, dropout: float = 0.1):
        super().__init__()
        def block(cin, cout):
            return [nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU(inplace=True),
                    nn.MaxPool2d(2)]

        self.features = nn.Sequential(*block(3, 8), *block(8, 16), *block(16, 16))
        self.classifier = _head(16 * 4 * 4, 64, dropout)

    def forward(self, x):
        x = self.features(x)
        return self.classifier(torch.flatten(x, 1))


class Vgg16Backbone(nn.Module):
    """Torchvision VGG16 convolutions with a two-class dense head."""

    input_size = 224

    def __init__(self, dropout: float = 0.1, pretrained: bool = False):
        super().__init__()
        weights = models.VGG16_Weights.IMAGENET1K_V1 if pretrained else None
        try:
            base = models.vgg16(weights=weights)
        except Exception as e:
            raise BackboneError(f"backbone load failure: {e}") from e
        self.features = base.features
        self.avgpool = base.avgpool
        self.classifier = _head(512 * 7 * 7, 4096, dropout)

    def forward(self, x):
        x = self.avgpool(self.features(x))
        return self.classifier(torch.flatten(x, 1))


def last_two_block_start(model: nn.Module) -> int:
    """Index into model.features where the last two conv blocks begin
    (a block ends at each pooling layer)."""
    pools = [i for i, m in enumerate(model.features) if isinstance(m, nn.MaxPool2d)]
    if len(pools) < 3:
        return 0
    return pools[-3] + 1


def build_backbone(name: str, weights: str = "random", dropout: float = 0.1,
                   seed: int = 0) -> nn.Module:
    """Instantiate a backbone.

    weights: "pretrained" (VGG16 only; downloads torchvision weights),
    "random" (seeded initialization), or a path to a saved state dict.
    """
    torch.manual_seed(seed)
    if name == "vgg16":
        model = Vgg16Backbone(dropout=dropout, pretrained=weights == "pretrained")
    elif name == "tiny":
        if weights == "pretrained":
            raise BackboneError("no pretrained weights exist for the tiny backbone")
        model = TinyBackbone(dropout=dropout)
    else:
        raise BackboneError(f"unknown backbone {name!r}; choose from {BACKBONES}")
    if weights not in ("pretrained", "random"):
        try:
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        except Exception as e:
            raise BackboneError(f"backbone load failure: {e}") from e
    model.eval()
    return model


def dense_width(model: nn.Module) -> int:
    """Width of the first dense layer, read from the layer itself."""
    return model.classifier[0].out_features


def capture_dense_activations(model: nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """Forward `batch` in inference mode and return the first dense layer's
    outputs (dropout inactive)."""
    captured = {}

    def hook(_module, _inputs, output):
        captured["value"] = output.detach()

    handle = model.classifier[0].register_forward_hook(hook)
    try:
        model.eval()
        with torch.no_grad():
            model(batch)
    finally:
        handle.remove()
    return captured["value"]
