"""Static result grids: I_d | S_d | S_r | I_r | I_gt."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from app.core.samples import Image, LabelMap
from app.utils.image_io import save_image

# Class 0 (background) is black; the rest are well-separated hues
PALETTE = np.array(
    [
        [0, 0, 0],
        [230, 25, 75],
        [60, 180, 75],
        [0, 130, 200],
        [255, 225, 25],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
        [220, 190, 255],
        [170, 110, 40],
        [128, 0, 0],
        [128, 128, 128],
    ],
    dtype=np.float64,
) / 255.0

SEPARATOR = 2


def colorize(labels: LabelMap) -> Image:
    return Image(PALETTE[labels.data % len(PALETTE)])


def make_grid(panels: Sequence[Image | LabelMap]) -> Image:
    images = [colorize(p) if isinstance(p, LabelMap) else p for p in panels]
    height = images[0].height
    gap = np.ones((height, SEPARATOR, 3))
    parts = []
    for i, img in enumerate(images):
        if i:
            parts.append(gap)
        parts.append(img.data)
    return Image(np.concatenate(parts, axis=1))


def save_grid(panels: Sequence[Image | LabelMap], path: str | Path) -> Path:
    return save_image(make_grid(panels), path)
