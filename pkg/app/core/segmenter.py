"""Small clean-condition segmenter used to produce degraded segmentations."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from app.core.errors import CheckpointError, ShapeError, TrainingDivergedError
from app.core.networks import EncoderDecoder
from app.core.samples import Image, LabelMap
from app.core.tensors import image_to_tensor, tensor_to_labels
from app.observability.observability_manager import ObservabilityManager

logger = logging.getLogger(__name__)


class Segmenter(nn.Module):
    def __init__(self, num_classes: int, width: int = 16, depth: int = 3):
        super().__init__()
        self.num_classes = num_classes
        self.width = width
        self.depth = depth
        self.net = EncoderDecoder(3, num_classes, width, depth)

    @property
    def min_size(self) -> int:
        return self.net.min_size

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images)

    def describe(self) -> dict:
        return {"num_classes": self.num_classes, "width": self.width, "depth": self.depth}

    @torch.no_grad()
    def predict_tensor(self, images: torch.Tensor) -> torch.Tensor:
        """(N, 3, H, W) images -> (N, H, W) hard class ids."""
        was_training = self.training
        self.eval()
        try:
            return self(images).argmax(dim=1)
        finally:
            self.train(was_training)

    def predict(self, image: Image) -> LabelMap:
        if min(image.shape) < self.min_size:
            raise ShapeError(f"Image {image.shape} is below the segmenter minimum {self.min_size}")
        device = next(self.parameters()).device
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                logits = self(image_to_tensor(image).to(device))
        finally:
            self.train(was_training)
        return tensor_to_labels(logits, self.num_classes)


def produce_degraded_segmentation(seg: Segmenter, degraded: Image) -> LabelMap:
    return seg.predict(degraded)


def _stack(pairs: Sequence[tuple[Image, LabelMap]]) -> tuple[torch.Tensor, torch.Tensor]:
    images = torch.from_numpy(np.stack([img.data.transpose(2, 0, 1) for img, _ in pairs])).float()
    labels = torch.from_numpy(np.stack([lab.data for _, lab in pairs])).long()
    return images, labels


def train_clean_segmenter(
    pairs: Sequence[tuple[Image, LabelMap]],
    epochs: int,
    seed: int,
    batch_size: int = 16,
    lr: float = 2e-3,
    width: int = 16,
    depth: int = 3,
    observability: ObservabilityManager | None = None,
    run_id: str = "",
) -> Segmenter:
    if not pairs:
        raise ShapeError("train_clean_segmenter needs at least one training pair")
    num_classes = pairs[0][1].num_classes

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        segmenter = Segmenter(num_classes, width, depth)
    images, labels = _stack(pairs)
    optimizer = torch.optim.Adam(segmenter.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(seed)

    iteration = 0
    segmenter.train()
    for epoch in range(1, epochs + 1):
        order = torch.randperm(len(pairs), generator=generator)
        losses = []
        for start in range(0, len(pairs), batch_size):
            batch = order[start : start + batch_size]
            loss = F.cross_entropy(segmenter(images[batch]), labels[batch])
            iteration += 1
            if not torch.isfinite(loss):
                raise TrainingDivergedError(iteration, {"segmenter_ce": float(loss)}, stage="segmenter")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss))
        mean_loss = float(np.mean(losses))
        if observability is not None:
            observability.log_segmenter_epoch(epoch, mean_loss, run_id)
        else:
            logger.info("segmenter epoch=%d loss=%.4f", epoch, mean_loss)

    segmenter.eval()
    for p in segmenter.parameters():
        p.requires_grad_(False)
    return segmenter


def segmenter_payload(seg: Segmenter) -> dict:
    return {"config": seg.describe(), "state_dict": seg.state_dict()}


def segmenter_from_payload(payload: dict) -> Segmenter:
    try:
        seg = Segmenter(**payload["config"])
        seg.load_state_dict(payload["state_dict"])
    except (KeyError, TypeError, RuntimeError) as e:
        raise CheckpointError(f"Invalid segmenter payload: {e}") from e
    seg.eval()
    for p in seg.parameters():
        p.requires_grad_(False)
    return seg


def save_segmenter(seg: Segmenter, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(segmenter_payload(seg), path)
    return path


def load_segmenter(path: str | Path) -> Segmenter:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Segmenter weights not found: {path}")
    return segmenter_from_payload(torch.load(path, map_location="cpu", weights_only=True))

