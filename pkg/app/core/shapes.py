"""Synthetic shapes corpus: textured backgrounds with labelled geometric shapes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigError
from app.core.samples import Image, LabelMap
from app.models.dataset import ToyDatasetConfig

logger = logging.getLogger(__name__)

SHAPE_KINDS = ("circle", "square", "triangle", "diamond", "bar")
BACKGROUND_CLASS = 0
MIN_COLOR_DISTANCE = 0.35


@dataclass(frozen=True)
class ShapeRecord:
    kind: str
    class_id: int
    cy: int
    cx: int
    radius: int
    color: tuple[float, float, float]


@dataclass(frozen=True)
class ToyScene:
    image: Image
    labels: LabelMap
    shapes: list[ShapeRecord] = field(default_factory=list)


def shape_mask(shape: ShapeRecord, height: int, width: int) -> np.ndarray:
    """Boolean mask of a shape; integer arithmetic only, so membership is exact."""
    yy, xx = np.mgrid[0:height, 0:width]
    dy = yy - shape.cy
    dx = xx - shape.cx
    r = shape.radius
    if shape.kind == "circle":
        return dy * dy + dx * dx <= r * r
    if shape.kind == "square":
        return (np.abs(dy) <= r) & (np.abs(dx) <= r)
    if shape.kind == "triangle":
        return (dy >= -r) & (dy <= r) & (2 * np.abs(dx) <= dy + r)
    if shape.kind == "diamond":
        return np.abs(dy) + np.abs(dx) <= r
    if shape.kind == "bar":
        return (3 * np.abs(dy) <= r) & (np.abs(dx) <= r)
    raise ConfigError(f"Unknown shape kind: {shape.kind}")


def available_kinds(num_classes: int) -> tuple[str, ...]:
    if num_classes > len(SHAPE_KINDS) + 1:
        raise ConfigError(
            f"num_classes={num_classes} exceeds the {len(SHAPE_KINDS)} shape kinds plus background"
        )
    return SHAPE_KINDS[: num_classes - 1]


class ShapesGenerator:
    """Deterministic scene generator; scene i depends only on (seed, i)."""

    def __init__(self, cfg: ToyDatasetConfig):
        self._cfg = cfg
        self._kinds = available_kinds(cfg.num_classes)
        size = cfg.image_size
        self._min_radius = max(3, size // 10)
        self._max_radius = max(self._min_radius + 1, size // 5)

    def _rng(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self._cfg.seed, index])))

    def _background(self, rng: np.random.Generator) -> np.ndarray:
        size = self._cfg.image_size
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
        base = rng.uniform(0.35, 0.65) + rng.uniform(-0.05, 0.05, size=3)
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        wave = 0.08 * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
        grain = rng.normal(0.0, 0.02, size=(size, size, 3))
        return np.clip(base[None, None, :] + wave[:, :, None] + grain, 0.0, 1.0)

    def _color(self, rng: np.random.Generator, background_mean: np.ndarray) -> tuple[float, float, float]:
        color = rng.uniform(0.0, 1.0, size=3)
        while np.linalg.norm(color - background_mean) < MIN_COLOR_DISTANCE:
            color = rng.uniform(0.0, 1.0, size=3)
        return tuple(float(c) for c in color)

    def scene(self, index: int) -> ToyScene:
        cfg = self._cfg
        size = cfg.image_size
        rng = self._rng(index)
        pixels = self._background(rng)
        background_mean = pixels.reshape(-1, 3).mean(axis=0)
        labels = np.full((size, size), BACKGROUND_CLASS, dtype=np.int64)
        shapes: list[ShapeRecord] = []

        for _ in range(int(rng.integers(cfg.min_shapes, cfg.max_shapes + 1))):
            kind_index = int(rng.integers(len(self._kinds)))
            radius = int(rng.integers(self._min_radius, self._max_radius + 1))
            shape = ShapeRecord(
                kind=self._kinds[kind_index],
                class_id=kind_index + 1,
                cy=int(rng.integers(radius, size - radius)),
                cx=int(rng.integers(radius, size - radius)),
                radius=radius,
                color=self._color(rng, background_mean),
            )
            mask = shape_mask(shape, size, size)
            pixels[mask] = shape.color
            labels[mask] = shape.class_id
            shapes.append(shape)

        # Store at 8-bit precision so files round-trip exactly
        pixels = np.round(pixels * 255.0) / 255.0
        return ToyScene(image=Image(pixels), labels=LabelMap(labels, cfg.num_classes), shapes=shapes)


def generate_toy_scenes(cfg: ToyDatasetConfig) -> list[ToyScene]:
    generator = ShapesGenerator(cfg)
    return [generator.scene(i) for i in range(cfg.n_samples)]


def generate_toy_dataset(cfg: ToyDatasetConfig) -> list[tuple[Image, LabelMap]]:
    scenes = generate_toy_scenes(cfg)
    logger.info("Generated %d toy scenes (%dx%d, K=%d)", len(scenes), cfg.image_size, cfg.image_size, cfg.num_classes)
    return [(s.image, s.labels) for s in scenes]
