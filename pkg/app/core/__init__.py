"""Core pipeline modules: samples, degradations, networks, losses, metrics, training."""

from app.core.samples import (
    Image,
    LabelMap,
    QuadrupleSample,
    SoftLabelMap,
    decode_labels,
    encode_labels,
    validate_sample,
)

__all__ = [
    "Image",
    "LabelMap",
    "SoftLabelMap",
    "QuadrupleSample",
    "encode_labels",
    "decode_labels",
    "validate_sample",
]
