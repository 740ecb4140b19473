import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core import degradations
from app.core.errors import ArgumentError, DomainError, ShapeError
from app.core.metrics import psnr
from app.core.samples import Image
from app.core.shapes import ShapesGenerator
from app.models.dataset import ToyDatasetConfig
from app.models.degradation import DegradationFamily, DegradationSpec
from tests.conftest import random_image


def test_severity_tables_are_exact():
    assert degradations.severity_table(DegradationFamily.GAUSSIAN_BLUR) == {"sigma": (1.2, 2.5, 6.5, 15.2)}
    assert degradations.severity_table(DegradationFamily.GAUSSIAN_NOISE) == {"variance": (0.05, 0.09, 0.13, 0.2)}
    assert degradations.severity_table(DegradationFamily.JPEG_COMPRESSION) == {"quality": (43, 12, 7, 4)}
    ca = degradations.severity_table(DegradationFamily.CHROMATIC_ABERRATION)
    assert ca == {"shift_r": (2, 6, 10, 14), "shift_b": (1, 3, 5, 7)}
    rf = degradations.severity_table(DegradationFamily.REFLECTION)
    assert rf["alpha"] == (0.9, 0.8, 0.7, 0.6)


def test_severity_index_is_bounded():
    with pytest.raises(ValidationError):
        DegradationSpec(family=DegradationFamily.GAUSSIAN_BLUR, severity_index=4)


def test_spec_rejects_unknown_params():
    with pytest.raises(ValidationError):
        DegradationSpec(family=DegradationFamily.GAUSSIAN_BLUR, params={"quality": 5})


def test_resolved_params_apply_overrides():
    spec = DegradationSpec(family=DegradationFamily.GAUSSIAN_BLUR, severity_index=2, params={"sigma": 0.7})
    assert spec.resolved_params() == {"sigma": 0.7}
    assert DegradationSpec(family=DegradationFamily.JPEG_COMPRESSION, severity_index=3).resolved_params() == {
        "quality": 4
    }


@pytest.mark.parametrize("sigma", [0.5, 1.2, 2.5, 6.5, 15.2])
def test_kernel_sums_to_one(sigma):
    kernel = degradations.gaussian_kernel_2d(sigma)
    assert abs(kernel.sum() - 1.0) <= 1e-9
    assert kernel.shape == (2 * math.ceil(3 * sigma) + 1,) * 2


def test_blur_rejects_non_positive_sigma():
    with pytest.raises(DomainError):
        degradations.gaussian_blur(random_image(8, 8), 0.0)


def test_blur_preserves_constant_image():
    img = Image(np.full((16, 16, 3), 0.5))
    out = degradations.gaussian_blur(img, 2.5)
    assert np.max(np.abs(out.data - 0.5)) <= 1e-12


def test_blur_matches_symmetric_pad_oracle():
    data = np.zeros((8, 8, 3))
    data[0, 0, :] = 1.0
    sigma = 1.2
    kernel = degradations.gaussian_kernel_2d(sigma)
    r = kernel.shape[0] // 2
    padded = np.pad(data, ((r, r), (r, r), (0, 0)), mode="symmetric")
    expected = np.zeros_like(data)
    for y in range(8):
        for x in range(8):
            window = padded[y : y + 2 * r + 1, x : x + 2 * r + 1, :]
            expected[y, x] = np.tensordot(kernel, window, axes=([0, 1], [0, 1]))
    out = degradations.gaussian_blur(Image(data), sigma)
    np.testing.assert_allclose(out.data, expected, atol=1e-9)


def test_blur_commutes_with_constant_offset():
    base = random_image(16, 16, 2).data * 0.5
    blurred = degradations.gaussian_blur(Image(base), 1.2).data
    shifted = degradations.gaussian_blur(Image(base + 0.25), 1.2).data
    np.testing.assert_allclose(shifted, blurred + 0.25, atol=1e-9)


def test_noise_zero_variance_is_identity():
    img = random_image(8, 8)
    assert np.array_equal(degradations.gaussian_noise(img, 0.0, seed=3).data, img.data)


def test_noise_rejects_negative_variance():
    with pytest.raises(DomainError):
        degradations.gaussian_noise(random_image(8, 8), -0.1, seed=0)


def test_noise_field_has_requested_variance():
    for variance in (0.05, 0.2):
        field = degradations.noise_field((1024, 1024, 3), variance, seed=9)
        assert abs(field.var() - variance) <= 0.05 * variance
        assert abs(field.mean()) <= 0.01


def test_noise_is_deterministic_per_seed():
    img = random_image(16, 16)
    a = degradations.gaussian_noise(img, 0.09, seed=42)
    b = degradations.gaussian_noise(img, 0.09, seed=42)
    c = degradations.gaussian_noise(img, 0.09, seed=43)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0


def test_jpeg_rejects_quality_out_of_range():
    with pytest.raises(DomainError):
        degradations.jpeg_compress(random_image(8, 8), 0)
    with pytest.raises(DomainError):
        degradations.jpeg_compress(random_image(8, 8), 101)


def test_jpeg_lower_quality_is_worse():
    scene = ShapesGenerator(ToyDatasetConfig(n_samples=1, image_size=64, num_classes=4, n_val=0)).scene(0)
    high = degradations.jpeg_compress(scene.image, 43)
    low = degradations.jpeg_compress(scene.image, 4)
    assert psnr(high, scene.image) > psnr(low, scene.image)
    assert high.shape == scene.image.shape


def test_jpeg_is_deterministic():
    img = random_image(16, 16, 5)
    assert np.array_equal(degradations.jpeg_compress(img, 12).data, degradations.jpeg_compress(img, 12).data)


def test_codec_identity_names_pillow():
    assert degradations.codec_identity().startswith("Pillow-")


def test_chromatic_aberration_zero_shift_is_identity():
    img = random_image(8, 8)
    assert np.array_equal(degradations.chromatic_aberration(img, 0, 0).data, img.data)


def test_chromatic_aberration_shift_oracle():
    img = random_image(8, 12, 4)
    out = degradations.chromatic_aberration(img, 2, 1).data
    np.testing.assert_array_equal(out[:, 2:, 0], img.data[:, :-2, 0])
    np.testing.assert_array_equal(out[:, :2, 0], np.repeat(img.data[:, :1, 0], 2, axis=1))
    np.testing.assert_array_equal(out[:, 1:, 2], img.data[:, :-1, 2])
    np.testing.assert_array_equal(out[:, :, 1], img.data[:, :, 1])


def test_chromatic_aberration_rejects_large_shift():
    with pytest.raises(DomainError):
        degradations.chromatic_aberration(random_image(8, 8), 8, 0)


def test_reflection_alpha_one_is_identity():
    scene, layer = random_image(16, 16, 1), random_image(16, 16, 2)
    assert np.array_equal(degradations.reflection_composite(scene, layer, alpha=1.0).data, scene.data)


def test_reflection_matches_formula():
    scene, layer = random_image(16, 16, 1), random_image(16, 16, 2)
    out = degradations.reflection_composite(scene, layer, alpha=0.7, blur_sigma=3.0)
    blurred = degradations.gaussian_blur(layer, 3.0).data
    np.testing.assert_allclose(out.data, np.clip(0.7 * scene.data + 0.3 * blurred, 0.0, 1.0), atol=1e-12)


def test_reflection_rejects_mismatched_layer():
    with pytest.raises(ShapeError):
        degradations.reflection_composite(random_image(16, 16), random_image(8, 8))


def test_apply_dispatches_to_primitives():
    img = random_image(16, 16, 7)
    blur = DegradationSpec(family=DegradationFamily.GAUSSIAN_BLUR, severity_index=0)
    assert np.array_equal(degradations.apply(blur, img).data, degradations.gaussian_blur(img, 1.2).data)
    noise = DegradationSpec(family=DegradationFamily.GAUSSIAN_NOISE, severity_index=2, seed=8)
    assert np.array_equal(
        degradations.apply(noise, img).data, degradations.gaussian_noise(img, 0.13, seed=8).data
    )
    ca = DegradationSpec(family=DegradationFamily.CHROMATIC_ABERRATION, severity_index=1)
    assert np.array_equal(degradations.apply(ca, img).data, degradations.chromatic_aberration(img, 6, 3).data)


def test_apply_reflection_requires_aux():
    spec = DegradationSpec(family=DegradationFamily.REFLECTION, severity_index=1, seed=1)
    with pytest.raises(ArgumentError):
        degradations.apply(spec, random_image(16, 16))


def test_apply_reflection_is_reproducible():
    spec = DegradationSpec(family=DegradationFamily.REFLECTION, severity_index=1, seed=1)
    scene, layer = random_image(16, 16, 1), random_image(16, 16, 2)
    a = degradations.apply(spec, scene, layer)
    b = degradations.apply(spec, scene, layer)
    assert np.array_equal(a.data, b.data)
