"""Shared pixel-data types, label encoding and sample validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.core.errors import (
    ClassCountMismatchError,
    DomainError,
    LabelRangeError,
    ShapeError,
    ShapeMismatchError,
    ValueRangeError,
)
from app.models.degradation import DegradationSpec

MIN_IMAGE_SIZE = 8
SIMPLEX_TOLERANCE = 1e-5


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x 3 real image with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ShapeError(f"Image must be HxWx3, got shape {data.shape}")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def clamped(cls, data: np.ndarray) -> "Image":
        return cls(np.clip(np.nan_to_num(np.asarray(data, dtype=np.float64)), 0.0, 1.0))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def validate(self) -> "Image":
        if self.height < MIN_IMAGE_SIZE or self.width < MIN_IMAGE_SIZE:
            raise ShapeMismatchError(
                f"Image {self.height}x{self.width} is below the {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE} minimum"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueRangeError("Image contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueRangeError(
                f"Image values must lie in [0, 1], got [{self.data.min():.4f}, {self.data.max():.4f}]"
            )
        return self


@dataclass(frozen=True, eq=False)
class LabelMap:
    """H x W integer class ids in {0..K-1}."""

    data: np.ndarray
    num_classes: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeError(f"LabelMap must be HxW, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.integer):
            raise ShapeError(f"LabelMap must hold integers, got {data.dtype}")
        if self.num_classes < 1:
            raise DomainError(f"num_classes must be positive, got {self.num_classes}")
        object.__setattr__(self, "data", _frozen(data.astype(np.int64)))

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])

    def first_out_of_range(self) -> tuple[int, int] | None:
        bad = np.argwhere((self.data < 0) | (self.data >= self.num_classes))
        if bad.size == 0:
            return None
        return int(bad[0][0]), int(bad[0][1])

    def validate(self) -> "LabelMap":
        pixel = self.first_out_of_range()
        if pixel is not None:
            raise LabelRangeError(
                f"Label {self.data[pixel]} at pixel {pixel} is outside [0, {self.num_classes - 1}]"
            )
        return self


@dataclass(frozen=True, eq=False)
class SoftLabelMap:
    """H x W x K per-class probabilities."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeError(f"SoftLabelMap must be HxWxK, got shape {data.shape}")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def num_classes(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])

    def validate(self) -> "SoftLabelMap":
        if np.any(self.data < 0):
            raise ValueRangeError("SoftLabelMap holds negative probabilities")
        sums = self.data.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE):
            worst = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
            raise ValueRangeError(f"Probabilities at pixel {tuple(int(i) for i in worst)} sum to {sums[worst]:.6f}")
        return self


@dataclass(frozen=True, eq=False)
class QuadrupleSample:
    degraded: Image
    degraded_seg: LabelMap
    gt_image: Image
    gt_seg: LabelMap
    degradation: DegradationSpec | None = None

    @property
    def num_classes(self) -> int:
        return self.gt_seg.num_classes


def encode_labels(labels: LabelMap, num_classes: int) -> SoftLabelMap:
    """Exact one-hot encoding, channel-last."""
    bad = np.argwhere((labels.data < 0) | (labels.data >= num_classes))
    if bad.size:
        h, w = int(bad[0][0]), int(bad[0][1])
        raise DomainError(f"Label {labels.data[h, w]} at pixel ({h}, {w}) is not below K={num_classes}")
    one_hot = np.eye(num_classes, dtype=np.float64)[labels.data]
    return SoftLabelMap(one_hot)


def decode_labels(soft: SoftLabelMap) -> LabelMap:
    # np.argmax returns the first maximum, so ties go to the lowest class index
    return LabelMap(np.argmax(soft.data, axis=2), soft.num_classes)


def validate_sample(sample: QuadrupleSample) -> QuadrupleSample:
    shapes = {
        "degraded": sample.degraded.shape,
        "degraded_seg": sample.degraded_seg.shape,
        "gt_image": sample.gt_image.shape,
        "gt_seg": sample.gt_seg.shape,
    }
    if len(set(shapes.values())) != 1:
        raise ShapeMismatchError(f"Sample arrays disagree in size: {shapes}")
    if sample.degraded_seg.num_classes != sample.gt_seg.num_classes:
        raise ClassCountMismatchError(
            f"degraded_seg has K={sample.degraded_seg.num_classes}, gt_seg has K={sample.gt_seg.num_classes}"
        )
    sample.degraded.validate()
    sample.gt_image.validate()
    sample.degraded_seg.validate()
    sample.gt_seg.validate()
    return sample
