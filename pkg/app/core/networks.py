"""Refinement and restoration generators plus the patch discriminators."""

from __future__ import annotations

import logging

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.parametrizations import spectral_norm

from app.core.errors import ShapeError
from app.core.samples import MIN_IMAGE_SIZE, Image, SoftLabelMap
from app.core.tensors import image_to_tensor, soft_to_tensor, tensor_to_image, tensor_to_soft

logger = logging.getLogger(__name__)

EXEMPLAR_EPS = 1e-3


class ConvBlock(nn.Module):
    """(conv3x3 => InstanceNorm => LeakyReLU) * 2"""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, bias=False),
            nn.InstanceNorm2d(out_channels, affine=True),
            nn.LeakyReLU(0.2),
            nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1, bias=False),
            nn.InstanceNorm2d(out_channels, affine=True),
            nn.LeakyReLU(0.2),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class EncoderDecoder(nn.Module):
    """Symmetric U-shaped encoder-decoder with concatenated skip connections.

    ``depth`` counts resolution levels, so ``depth - 1`` downsamplings. Inputs
    of any size from 8x8 up are padded on the bottom and right to a multiple of
    ``2 ** (depth - 1)`` (and to at least 2x2 at the bottleneck for instance
    normalization); the output is cropped back to the input size.
    """

    def __init__(self, in_channels: int, out_channels: int, width: int = 32, depth: int = 4):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.depth = depth
        widths = [width * 2**i for i in range(depth)]

        self.encoders = nn.ModuleList()
        previous = in_channels
        for w in widths:
            self.encoders.append(ConvBlock(previous, w))
            previous = w
        self.pool = nn.AvgPool2d(2)
        self.decoders = nn.ModuleList(
            ConvBlock(widths[i + 1] + widths[i], widths[i]) for i in reversed(range(depth - 1))
        )
        self.head = nn.Conv2d(widths[0], out_channels, kernel_size=1)

    @property
    def size_multiple(self) -> int:
        return 2 ** (self.depth - 1)

    @property
    def min_size(self) -> int:
        return MIN_IMAGE_SIZE

    def check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"Expected (N, {self.in_channels}, H, W) input, got {tuple(x.shape)}")
        h, w = x.shape[-2:]
        if h < self.min_size or w < self.min_size:
            raise ShapeError(f"Input {h}x{w} is below the {self.min_size}x{self.min_size} minimum")

    def padded_size(self, h: int, w: int) -> tuple[int, int]:
        m = self.size_multiple
        return max(-(-h // m) * m, 2 * m), max(-(-w // m) * m, 2 * m)

    def _pad(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        target_h, target_w = self.padded_size(h, w)
        pad_h, pad_w = target_h - h, target_w - w
        if not pad_h and not pad_w:
            return x
        # reflect needs the pad to be smaller than the side it mirrors
        mode = "reflect" if pad_h < h and pad_w < w else "replicate"
        return F.pad(x, (0, pad_w, 0, pad_h), mode=mode)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        h_in, w_in = x.shape[-2:]
        skips = []
        h = self._pad(x)
        for i, encoder in enumerate(self.encoders):
            if i > 0:
                h = self.pool(h)
            h = encoder(h)
            skips.append(h)
        for decoder, skip in zip(self.decoders, reversed(skips[:-1])):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = decoder(torch.cat([h, skip], dim=1))
        return self.head(h)[..., :h_in, :w_in]


class RefinementNet(nn.Module):
    """G1: {segmentation, degraded image} -> refined per-pixel class probabilities."""

    def __init__(self, num_classes: int, width: int = 32, depth: int = 4):
        super().__init__()
        self.num_classes = num_classes
        self.body = EncoderDecoder(3 + num_classes, num_classes, width, depth)

    def forward(self, seg: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        _check_pair(seg, image, self.num_classes)
        logits = self.body(torch.cat([seg, image], dim=1))
        return torch.softmax(logits, dim=1)


class RestorationNet(nn.Module):
    """G2: {segmentation, degraded exemplar} -> restored image in [0, 1].

    With ``exemplar_skip`` the head predicts a correction to the exemplar in
    logit space, so an untrained network starts near the identity.
    """

    def __init__(self, num_classes: int, width: int = 32, depth: int = 4, exemplar_skip: bool = True):
        super().__init__()
        self.num_classes = num_classes
        self.exemplar_skip = exemplar_skip
        self.body = EncoderDecoder(3 + num_classes, 3, width, depth)

    def forward(self, seg: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        _check_pair(seg, image, self.num_classes)
        out = self.body(torch.cat([seg, image], dim=1))
        if self.exemplar_skip:
            out = out + torch.logit(image.clamp(EXEMPLAR_EPS, 1.0 - EXEMPLAR_EPS))
        return torch.sigmoid(out)


class PatchDiscriminator(nn.Module):
    """Stride-2 patch classifier; each output cell scores one receptive field."""

    def __init__(self, in_channels: int, width: int = 32, blocks: int = 4, use_spectral_norm: bool = True):
        super().__init__()
        self.in_channels = in_channels
        self.use_spectral_norm = use_spectral_norm

        def wrap(conv: nn.Conv2d) -> nn.Module:
            return spectral_norm(conv) if use_spectral_norm else conv

        layers: list[nn.Module] = []
        previous = in_channels
        for i in range(blocks):
            channels = width * 2 ** min(i, 3)
            layers += [wrap(nn.Conv2d(previous, channels, kernel_size=4, stride=2, padding=1)), nn.LeakyReLU(0.2)]
            previous = channels
        layers.append(wrap(nn.Conv2d(previous, 1, kernel_size=3, padding=1)))
        self.model = nn.Sequential(*layers)
        self.blocks = blocks

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"Discriminator expects {self.in_channels} channels, got {tuple(x.shape)}")
        if min(x.shape[-2:]) < 2**self.blocks:
            raise ShapeError(f"Discriminator input {tuple(x.shape[-2:])} is smaller than {2**self.blocks}")
        return self.model(x)

    def conv_weights(self) -> list[torch.Tensor]:
        """Effective (normalized) weights of every convolution."""
        return [m.weight for m in self.model if isinstance(m, nn.Conv2d)]


def segmentation_discriminator(num_classes: int, width: int = 32, blocks: int = 4) -> PatchDiscriminator:
    """D1, conditioned on the degraded image; always spectrally normalized."""
    return PatchDiscriminator(num_classes + 3, width, blocks, use_spectral_norm=True)


def image_discriminator(width: int = 32, blocks: int = 4, use_spectral_norm: bool = False) -> PatchDiscriminator:
    """D2, unconditional."""
    return PatchDiscriminator(3, width, blocks, use_spectral_norm=use_spectral_norm)


def _check_pair(seg: torch.Tensor, image: torch.Tensor, num_classes: int) -> None:
    if seg.dim() != 4 or seg.shape[1] != num_classes:
        raise ShapeError(f"Segmentation must be (N, {num_classes}, H, W), got {tuple(seg.shape)}")
    if image.dim() != 4 or image.shape[1] != 3:
        raise ShapeError(f"Image must be (N, 3, H, W), got {tuple(image.shape)}")
    if seg.shape[0] != image.shape[0] or seg.shape[-2:] != image.shape[-2:]:
        raise ShapeError(f"Segmentation {tuple(seg.shape)} and image {tuple(image.shape)} disagree")


def discriminate(d: PatchDiscriminator, *inputs: torch.Tensor) -> torch.Tensor:
    """Concatenate inputs along channels and score them."""
    return d(torch.cat(inputs, dim=1))


def _device_of(module: nn.Module) -> torch.device:
    return next(module.parameters()).device


@torch.no_grad()
def refine(g1: RefinementNet, s_d: SoftLabelMap, i_d: Image) -> SoftLabelMap:
    """Inference wrapper over core types; use the module directly for training."""
    if s_d.num_classes != g1.num_classes:
        raise ShapeError(f"Segmentation has K={s_d.num_classes}, network expects K={g1.num_classes}")
    device = _device_of(g1)
    out = g1(soft_to_tensor(s_d).to(device), image_to_tensor(i_d).to(device))
    return tensor_to_soft(out)


@torch.no_grad()
def restore(g2: RestorationNet, s_r: SoftLabelMap, i_d: Image) -> Image:
    if s_r.shape != i_d.shape:
        raise ShapeError(f"Segmentation {s_r.shape} and image {i_d.shape} disagree")
    device = _device_of(g2)
    out = g2(soft_to_tensor(s_r).to(device), image_to_tensor(i_d).to(device))
    return tensor_to_image(out)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
