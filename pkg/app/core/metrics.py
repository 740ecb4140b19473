"""Segmentation scores from a confusion matrix, plus PSNR and SSIM."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from skimage.metrics import mean_squared_error, structural_similarity
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from app.core.errors import DomainError, ShapeError
from app.core.samples import Image, LabelMap
from app.models.evaluation import SegScores

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[i][j] = pixels with ground truth i predicted as j."""

    counts: np.ndarray

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape:
            raise ShapeError(f"Cannot add confusion matrices {self.counts.shape} and {other.counts.shape}")
        return ConfusionMatrix(self.counts + other.counts)


def confusion_matrix(pred: LabelMap, gt: LabelMap, num_classes: int) -> ConfusionMatrix:
    if pred.shape != gt.shape:
        raise ShapeError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    for name, labels in (("prediction", pred), ("ground truth", gt)):
        if labels.data.min() < 0 or labels.data.max() >= num_classes:
            raise DomainError(f"{name} holds labels outside [0, {num_classes - 1}]")
    counts = sk_confusion_matrix(gt.data.ravel(), pred.data.ravel(), labels=np.arange(num_classes))
    return ConfusionMatrix(counts.astype(np.int64))


def seg_scores(cm: ConfusionMatrix) -> SegScores:
    """PA, mPA, mIoU and FWIoU; classes absent from both maps are left out of the means."""
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise DomainError("Confusion matrix is empty")
    diag = np.diag(counts)
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    union = rows + cols - diag

    present_rows = rows > 0
    present_any = union > 0
    acc = np.divide(diag, rows, out=np.zeros_like(diag), where=present_rows)
    iou = np.divide(diag, union, out=np.zeros_like(diag), where=present_any)

    pa = diag.sum() / total
    mpa = acc[present_rows].mean()
    miou = iou[present_any].mean()
    fwiou = float(np.sum((rows / total) * iou))
    return SegScores(
        pa=_unit(pa),
        mpa=_unit(mpa),
        miou=_unit(miou),
        fwiou=_unit(fwiou),
    )


def _unit(value: float) -> float:
    return float(min(max(value, 0.0), 1.0))


def _check_pair(a: Image, b: Image, name: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{name}: images {a.data.shape} and {b.data.shape} differ")


def psnr(a: Image, b: Image) -> float:
    """PSNR in dB for [0, 1] images; identical images give +inf."""
    _check_pair(a, b, "psnr")
    mse = mean_squared_error(a.data, b.data)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(1.0 / mse))


def ssim(a: Image, b: Image) -> float:
    _check_pair(a, b, "ssim")
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    return float(
        structural_similarity(
            a.data,
            b.data,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            data_range=1.0,
            channel_axis=-1,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
    )
