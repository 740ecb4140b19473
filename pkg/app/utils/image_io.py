from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from app.core.errors import DatasetIOError
from app.core.samples import Image, LabelMap

logger = logging.getLogger(__name__)


def to_uint8(image: Image) -> np.ndarray:
    return np.round(image.data * 255.0).astype(np.uint8)


def quantize(image: Image) -> Image:
    """Round-trip through the 8-bit on-disk representation."""
    return Image(to_uint8(image).astype(np.float64) / 255.0)


def load_image(path: str | Path) -> Image:
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            array = np.asarray(pil.convert("RGB"), dtype=np.float64)
    except (OSError, ValueError) as e:
        raise DatasetIOError("Cannot read image", path) from e
    return Image(array / 255.0)


def save_image(image: Image, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(to_uint8(image)).save(path)
    except OSError as e:
        raise DatasetIOError("Cannot write image", path) from e
    return path


def load_label_map(path: str | Path, num_classes: int) -> LabelMap:
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            if pil.mode not in ("L", "P"):
                raise DatasetIOError(f"Label map must be single-channel, got mode {pil.mode}", path)
            array = np.asarray(pil, dtype=np.int64)
    except OSError as e:
        raise DatasetIOError("Cannot read label map", path) from e
    return LabelMap(array, num_classes)


def save_label_map(labels: LabelMap, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(labels.data.astype(np.uint8)).save(path)
    except OSError as e:
        raise DatasetIOError("Cannot write label map", path) from e
    return path
