"""Seedable synthesis of blur, noise, JPEG, chromatic aberration and reflection."""

from __future__ import annotations

import io
import logging
import math

import numpy as np
from PIL import Image as PILImage
from PIL import features
from scipy import ndimage

from app.core.errors import ArgumentError, DomainError, ShapeError
from app.core.samples import Image
from app.models.degradation import SEVERITY_TABLES, DegradationFamily, DegradationSpec
from app.utils.image_io import to_uint8

logger = logging.getLogger(__name__)

KERNEL_SUM_TOLERANCE = 1e-9
# scipy "reflect" repeats the edge sample (d c b a | a b c d)
BORDER_MODE = "reflect"


def severity_table(family: DegradationFamily) -> dict[str, tuple]:
    return dict(SEVERITY_TABLES[family])


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise DomainError(f"Blur sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    assert abs(kernel.sum() - 1.0) <= KERNEL_SUM_TOLERANCE
    return kernel


def gaussian_kernel_2d(sigma: float) -> np.ndarray:
    k = gaussian_kernel_1d(sigma)
    kernel = np.outer(k, k)
    assert abs(kernel.sum() - 1.0) <= KERNEL_SUM_TOLERANCE
    return kernel


def _blur_array(data: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel_1d(sigma)
    # The 2D kernel is separable; the kernel is symmetric so correlation equals convolution
    out = ndimage.correlate1d(data, kernel, axis=0, mode=BORDER_MODE)
    return ndimage.correlate1d(out, kernel, axis=1, mode=BORDER_MODE)


def gaussian_blur(img: Image, sigma: float) -> Image:
    return Image.clamped(_blur_array(img.data, sigma))


def noise_field(shape: tuple[int, ...], variance: float, seed: int) -> np.ndarray:
    """Zero-mean i.i.d. Gaussian samples, before any clamping."""
    if variance < 0:
        raise DomainError(f"Noise variance must be non-negative, got {variance}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.normal(0.0, math.sqrt(variance), size=shape)


def gaussian_noise(img: Image, variance: float, seed: int) -> Image:
    if variance < 0:
        raise DomainError(f"Noise variance must be non-negative, got {variance}")
    if variance == 0:
        return Image(img.data)
    return Image.clamped(img.data + noise_field(img.data.shape, variance, seed))


def codec_identity() -> str:
    """Pinned JPEG codec, recorded next to JPEG samples in the manifest."""
    import PIL

    libjpeg = features.version("jpg") or "unknown"
    return f"Pillow-{PIL.__version__}/libjpeg-{libjpeg}"


def jpeg_compress(img: Image, quality: int) -> Image:
    if not 1 <= int(quality) <= 100:
        raise DomainError(f"JPEG quality must be in [1, 100], got {quality}")
    buffer = io.BytesIO()
    PILImage.fromarray(to_uint8(img)).save(
        buffer, format="JPEG", quality=int(quality), optimize=False, progressive=False
    )
    buffer.seek(0)
    with PILImage.open(buffer) as decoded:
        array = np.asarray(decoded.convert("RGB"), dtype=np.float64)
    return Image(array / 255.0)


def _shift_right(channel: np.ndarray, shift: int) -> np.ndarray:
    if shift == 0:
        return channel.copy()
    padded = np.pad(channel, ((0, 0), (shift, 0)), mode="edge")
    return padded[:, : channel.shape[1]]


def chromatic_aberration(img: Image, shift_r: int, shift_b: int) -> Image:
    """Translate R by +shift_r and B by +shift_b columns, edge-replicating the vacated columns."""
    shift_r, shift_b = int(shift_r), int(shift_b)
    for name, shift in (("shift_r", shift_r), ("shift_b", shift_b)):
        if shift < 0 or shift >= img.width:
            raise DomainError(f"{name}={shift} must satisfy 0 <= shift < W={img.width}")
    out = np.array(img.data, copy=True)
    out[:, :, 0] = _shift_right(img.data[:, :, 0], shift_r)
    out[:, :, 2] = _shift_right(img.data[:, :, 2], shift_b)
    return Image(out)


def reflection_composite(scene: Image, reflection: Image, alpha: float = 0.8, blur_sigma: float = 3.0) -> Image:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"Reflection alpha must be in [0, 1], got {alpha}")
    if scene.shape != reflection.shape:
        raise ShapeError(f"Reflection layer {reflection.shape} must match scene {scene.shape}")
    if alpha == 1.0:
        return Image(scene.data)
    layer = _blur_array(reflection.data, blur_sigma)
    return Image.clamped(alpha * scene.data + (1.0 - alpha) * layer)


def _jittered_alpha(alpha: float, jitter: float, seed: int) -> float:
    if jitter <= 0:
        return alpha
    rng = np.random.Generator(np.random.PCG64(seed))
    return float(np.clip(alpha + rng.uniform(-jitter, jitter), 0.0, 1.0))


def apply(spec: DegradationSpec, img: Image, aux: Image | None = None) -> Image:
    """Single dispatch point for all degradation families."""
    params = spec.resolved_params()
    family = spec.family
    if family == DegradationFamily.GAUSSIAN_BLUR:
        return gaussian_blur(img, float(params["sigma"]))
    if family == DegradationFamily.GAUSSIAN_NOISE:
        return gaussian_noise(img, float(params["variance"]), spec.seed)
    if family == DegradationFamily.JPEG_COMPRESSION:
        return jpeg_compress(img, int(params["quality"]))
    if family == DegradationFamily.CHROMATIC_ABERRATION:
        return chromatic_aberration(img, int(params["shift_r"]), int(params["shift_b"]))
    if family == DegradationFamily.REFLECTION:
        if aux is None:
            raise ArgumentError("Reflection degradation requires the reflection layer as aux")
        alpha = _jittered_alpha(float(params["alpha"]), float(params["alpha_jitter"]), spec.seed)
        return reflection_composite(img, aux, alpha, float(params["blur_sigma"]))
    raise DomainError(f"Unsupported degradation family: {family}")
