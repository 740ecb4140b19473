import numpy as np
import pytest

from app.core.errors import (
    ClassCountMismatchError,
    DomainError,
    LabelRangeError,
    ShapeError,
    ShapeMismatchError,
    ValueRangeError,
)
from app.core.samples import (
    Image,
    LabelMap,
    QuadrupleSample,
    SoftLabelMap,
    decode_labels,
    encode_labels,
    validate_sample,
)
from tests.conftest import random_image, random_labels


def test_encode_single_pixel():
    soft = encode_labels(LabelMap(np.array([[0]]), 2), 2)
    assert soft.data.tolist() == [[[1.0, 0.0]]]


def test_encode_channels_are_complements():
    soft = encode_labels(LabelMap(np.array([[0, 1], [1, 0]]), 2), 2)
    np.testing.assert_array_equal(soft.data[..., 0], 1.0 - soft.data[..., 1])


def test_encode_decode_round_trip():
    labels = random_labels(8, 8, 5, seed=3)
    assert np.array_equal(decode_labels(encode_labels(labels, 5)).data, labels.data)


def test_encode_rejects_out_of_range_label_and_names_pixel():
    labels = LabelMap(np.array([[0, 1], [2, 0]]), 2)
    with pytest.raises(DomainError, match=r"\(1, 0\)"):
        encode_labels(labels, 2)


def test_decode_tie_goes_to_lowest_class():
    soft = SoftLabelMap(np.array([[[0.5, 0.5]]]))
    assert decode_labels(soft).data[0, 0] == 0


def test_decode_matches_per_pixel_loop(rng):
    logits = rng.normal(size=(8, 8, 4))
    probs = np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)
    decoded = decode_labels(SoftLabelMap(probs)).data
    for h in range(8):
        for w in range(8):
            best = 0
            for c in range(1, 4):
                if probs[h, w, c] > probs[h, w, best]:
                    best = c
            assert decoded[h, w] == best


def test_image_rejects_wrong_channel_count():
    with pytest.raises(ShapeError):
        Image(np.zeros((8, 8, 4)))


def test_image_validate_range_and_size():
    with pytest.raises(ValueRangeError):
        Image(np.full((8, 8, 3), 1.5)).validate()
    with pytest.raises(ShapeMismatchError):
        Image(np.zeros((4, 8, 3))).validate()


def test_soft_label_map_simplex_check():
    SoftLabelMap(np.full((2, 2, 4), 0.25)).validate()
    with pytest.raises(ValueRangeError):
        SoftLabelMap(np.full((2, 2, 4), 0.3)).validate()


def test_core_values_are_read_only():
    img = random_image(8, 8)
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 0.0


def _sample(size=32, k=4, gt_size=None):
    gt_size = gt_size or size
    return QuadrupleSample(
        degraded=random_image(size, size, 1),
        degraded_seg=random_labels(size, size, k, 2),
        gt_image=random_image(gt_size, gt_size, 3),
        gt_seg=random_labels(gt_size, gt_size, k, 4),
    )


def test_validate_sample_returns_sample_unchanged():
    sample = _sample()
    assert validate_sample(sample) is sample


def test_validate_sample_shape_mismatch():
    sample = QuadrupleSample(
        degraded=random_image(16, 16),
        degraded_seg=random_labels(16, 16, 4),
        gt_image=random_image(32, 32),
        gt_seg=random_labels(16, 16, 4),
    )
    with pytest.raises(ShapeMismatchError):
        validate_sample(sample)


def test_validate_sample_label_range():
    bad = np.zeros((32, 32), dtype=np.int64)
    bad[3, 5] = 4
    sample = QuadrupleSample(
        degraded=random_image(32, 32),
        degraded_seg=LabelMap(bad, 4),
        gt_image=random_image(32, 32),
        gt_seg=random_labels(32, 32, 4),
    )
    with pytest.raises(LabelRangeError):
        validate_sample(sample)


def test_validate_sample_class_count_mismatch():
    sample = QuadrupleSample(
        degraded=random_image(32, 32),
        degraded_seg=random_labels(32, 32, 3),
        gt_image=random_image(32, 32),
        gt_seg=random_labels(32, 32, 4),
    )
    with pytest.raises(ClassCountMismatchError):
        validate_sample(sample)
