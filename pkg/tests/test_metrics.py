import math

import numpy as np
import pytest

from app.core.errors import DomainError, ShapeError
from app.core.metrics import ConfusionMatrix, confusion_matrix, psnr, seg_scores, ssim
from app.core.samples import Image, LabelMap
from tests.conftest import random_image, random_labels


def test_hand_computed_scores():
    pred = LabelMap(np.array([[0, 0], [0, 0]]), 2)
    gt = LabelMap(np.array([[0, 0], [1, 1]]), 2)
    cm = confusion_matrix(pred, gt, 2)
    assert cm.counts.tolist() == [[2, 0], [2, 0]]
    scores = seg_scores(cm)
    assert scores.pa == pytest.approx(0.5)
    assert scores.mpa == pytest.approx(0.5)
    assert scores.miou == pytest.approx(0.25)
    assert scores.fwiou == pytest.approx(0.25)


def _loop_scores(pred, gt, k):
    counts = np.zeros((k, k))
    for p, g in zip(pred.ravel(), gt.ravel()):
        counts[g, p] += 1
    total = counts.sum()
    accs, ious, fw = [], [], 0.0
    for c in range(k):
        tp = counts[c, c]
        row = counts[c, :].sum()
        col = counts[:, c].sum()
        union = row + col - tp
        if row > 0:
            accs.append(tp / row)
        if union > 0:
            ious.append(tp / union)
            fw += (row / total) * (tp / union)
    return np.trace(counts) / total, np.mean(accs), np.mean(ious), fw


def test_scores_match_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        pred = rng.integers(0, k, size=(16, 16))
        gt = rng.integers(0, k, size=(16, 16))
        scores = seg_scores(confusion_matrix(LabelMap(pred, k), LabelMap(gt, k), k))
        pa, mpa, miou, fw = _loop_scores(pred, gt, k)
        assert scores.pa == pytest.approx(pa, abs=1e-12)
        assert scores.mpa == pytest.approx(mpa, abs=1e-12)
        assert scores.miou == pytest.approx(miou, abs=1e-12)
        assert scores.fwiou == pytest.approx(fw, abs=1e-12)


def test_identical_maps_score_one():
    labels = random_labels(16, 16, 4)
    scores = seg_scores(confusion_matrix(labels, labels, 4))
    assert (scores.pa, scores.mpa, scores.miou, scores.fwiou) == (1.0, 1.0, 1.0, 1.0)


def test_absent_class_is_excluded_from_means():
    labels = LabelMap(np.array([[0, 1], [1, 0]]), 4)
    scores = seg_scores(confusion_matrix(labels, labels, 4))
    assert scores.miou == 1.0
    assert scores.mpa == 1.0


def test_pixel_accuracy_is_fraction_correct():
    gt = random_labels(10, 10, 3, seed=1)
    data = np.array(gt.data)
    data.ravel()[:37] = (data.ravel()[:37] + 1) % 3
    scores = seg_scores(confusion_matrix(LabelMap(data, 3), gt, 3))
    assert scores.pa == pytest.approx(0.63)


def test_confusion_matrix_is_additive():
    a, b = random_labels(8, 8, 3, 1), random_labels(8, 8, 3, 2)
    c, d = random_labels(8, 8, 3, 3), random_labels(8, 8, 3, 4)
    stacked = confusion_matrix(
        LabelMap(np.concatenate([a.data, c.data]), 3), LabelMap(np.concatenate([b.data, d.data]), 3), 3
    )
    summed = confusion_matrix(a, b, 3) + confusion_matrix(c, d, 3)
    assert np.array_equal(stacked.counts, summed.counts)
    assert summed.total == 128


def test_scores_invariant_to_class_permutation():
    pred, gt = random_labels(12, 12, 4, 5), random_labels(12, 12, 4, 6)
    perm = np.array([2, 0, 3, 1])
    a = seg_scores(confusion_matrix(pred, gt, 4))
    b = seg_scores(confusion_matrix(LabelMap(perm[pred.data], 4), LabelMap(perm[gt.data], 4), 4))
    assert a.miou == pytest.approx(b.miou)
    assert a.fwiou == pytest.approx(b.fwiou)
    assert a.mpa == pytest.approx(b.mpa)


def test_confusion_matrix_errors():
    with pytest.raises(ShapeError):
        confusion_matrix(random_labels(4, 4, 2), random_labels(4, 5, 2), 2)
    with pytest.raises(DomainError):
        confusion_matrix(LabelMap(np.array([[3]]), 4), LabelMap(np.array([[0]]), 4), 2)
    with pytest.raises(DomainError):
        seg_scores(ConfusionMatrix.empty(3))


def test_psnr_identical_is_infinite():
    img = random_image(8, 8)
    assert psnr(img, img) == math.inf


def test_psnr_constant_offset():
    a = Image(np.full((8, 8, 3), 0.5))
    b = Image(np.full((8, 8, 3), 0.5 + 16 / 255))
    assert psnr(a, b) == pytest.approx(24.048, abs=1e-3)


def test_psnr_matches_loop():
    for seed in range(200):
        a, b = random_image(16, 16, seed=2 * seed), random_image(16, 16, seed=2 * seed + 1)
        total = 0.0
        for h in range(16):
            for w in range(16):
                for c in range(3):
                    total += (a.data[h, w, c] - b.data[h, w, c]) ** 2
        expected = 10.0 * math.log10(1.0 / (total / (16 * 16 * 3)))
        assert psnr(a, b) == pytest.approx(expected, abs=1e-6)


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(random_image(8, 8), random_image(8, 9))


def test_ssim_identical_is_one():
    img = random_image(32, 32)
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_ssim_is_symmetric_and_drops_for_inverted_image():
    a = random_image(32, 32, 1)
    inverted = Image(1.0 - a.data)
    assert ssim(a, inverted) < 0.5
    b = random_image(32, 32, 2)
    assert ssim(a, b) == pytest.approx(ssim(b, a))


def test_ssim_constant_images():
    a = Image(np.full((16, 16, 3), 0.5))
    b = Image(np.full((16, 16, 3), 0.7))
    assert ssim(a, b) == pytest.approx(0.7001 / 0.7401, abs=1e-6)


def test_ssim_rejects_small_images():
    with pytest.raises(ShapeError):
        ssim(random_image(8, 8), random_image(8, 8))
