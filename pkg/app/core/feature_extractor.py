"""Frozen convolutional pyramid tapped before its activations."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Sequence

import torch
import torch.nn as nn

from app.config import Settings, get_settings
from app.core.errors import ConfigError, ShapeError
from app.core.tensors import state_checksum

logger = logging.getLogger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
# conv1_1, conv2_1, conv3_1, conv4_1, conv5_1 in torchvision's vgg19().features
VGG19_TAPS = (0, 5, 10, 19, 28)


class FeatureExtractor(nn.Module):
    """Runs ``body`` layer by layer and returns the outputs at ``tap_indices``.

    Taps are meant to sit on convolutions, so they are pre-activation values.
    Parameters never require gradients and the module stays in eval mode.
    """

    def __init__(
        self,
        body: nn.Sequential,
        tap_indices: Sequence[int],
        min_size: int = 1,
        normalize: tuple[Sequence[float], Sequence[float]] | None = None,
        spec: dict[str, Any] | None = None,
    ):
        super().__init__()
        if not tap_indices:
            raise ConfigError("FeatureExtractor needs at least one tap")
        self.body = body
        self.tap_indices = tuple(sorted(set(tap_indices)))
        self.min_size = min_size
        self.spec = spec or {"kind": "custom"}
        if normalize is not None:
            mean, std = normalize
            self.register_buffer("mean", torch.tensor(mean).view(1, -1, 1, 1))
            self.register_buffer("std", torch.tensor(std).view(1, -1, 1, 1))
        else:
            self.mean = None
            self.std = None
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> "FeatureExtractor":
        return super().train(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        if min(x.shape[-2:]) < self.min_size:
            raise ShapeError(f"Image {tuple(x.shape[-2:])} is below the extractor minimum {self.min_size}")
        if self.mean is not None:
            x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        features = []
        last = self.tap_indices[-1]
        for i, layer in enumerate(self.body):
            x = layer(x)
            if i in self.tap_indices:
                features.append(x)
            if i == last:
                break
        return features

    def checksum(self) -> str:
        return state_checksum(self)

    @classmethod
    def random_pyramid(cls, seed: int = 1234, widths: Sequence[int] = (16, 32, 64)) -> "FeatureExtractor":
        """Fixed-seed bias-free conv pyramid; zero input gives zero features."""
        generator = torch.Generator().manual_seed(seed)
        layers: list[nn.Module] = []
        taps = []
        previous = 3
        for level, width in enumerate(widths):
            if level > 0:
                layers += [nn.ReLU(), nn.AvgPool2d(2)]
            conv = nn.Conv2d(previous, width, kernel_size=3, padding=1, bias=False)
            fan_in = previous * 9
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=generator) * math.sqrt(2.0 / fan_in))
            taps.append(len(layers))
            layers.append(conv)
            previous = width
        return cls(
            nn.Sequential(*layers),
            taps,
            min_size=2 ** (len(widths) - 1),
            spec={"kind": "random", "seed": seed, "widths": list(widths)},
        )

    @classmethod
    def vgg19(cls, weights_path: str | Path) -> "FeatureExtractor":
        from torchvision.models import vgg19

        path = Path(weights_path)
        if not path.is_file():
            raise ConfigError(f"VGG-19 weights not found at {path}")
        model = vgg19(weights=None)
        model.load_state_dict(torch.load(path, map_location="cpu", weights_only=True))
        features = model.features[: VGG19_TAPS[-1] + 1]
        # In-place ReLUs would overwrite the tapped conv outputs
        for i, layer in enumerate(features):
            if isinstance(layer, nn.ReLU):
                features[i] = nn.ReLU(inplace=False)
        return cls(
            features,
            VGG19_TAPS,
            min_size=16,
            normalize=(IMAGENET_MEAN, IMAGENET_STD),
            spec={"kind": "vgg19", "weights_path": str(path)},
        )


def build_feature_extractor(settings: Settings | None = None) -> FeatureExtractor:
    settings = settings or get_settings()
    if settings.feature_extractor == "vgg19":
        logger.info("Using VGG-19 feature extractor from %s", settings.vgg19_weights_path)
        return FeatureExtractor.vgg19(settings.vgg19_weights_path)
    if settings.feature_extractor == "random":
        return FeatureExtractor.random_pyramid(settings.feature_extractor_seed)
    raise ConfigError(f"Unknown feature extractor: {settings.feature_extractor}")


def feature_extractor_from_spec(spec: dict[str, Any]) -> FeatureExtractor:
    """Rebuild the extractor recorded in a checkpoint."""
    kind = spec.get("kind")
    if kind == "random":
        return FeatureExtractor.random_pyramid(int(spec["seed"]), tuple(spec.get("widths", (16, 32, 64))))
    if kind == "vgg19":
        return FeatureExtractor.vgg19(spec["weights_path"])
    raise ConfigError(f"Cannot rebuild feature extractor of kind {kind!r}")
