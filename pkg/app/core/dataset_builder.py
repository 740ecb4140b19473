"""Materialize quadruple datasets on disk and load them back."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from pydantic import ValidationError

from app.core import degradations
from app.core.errors import DatasetIOError, SampleValidationError
from app.core.samples import Image, LabelMap, QuadrupleSample, validate_sample
from app.core.segmenter import Segmenter, produce_degraded_segmentation, save_segmenter
from app.core.shapes import generate_toy_dataset
from app.models.dataset import DatasetManifest, ManifestRecord, Split, ToyDatasetConfig
from app.models.degradation import DegradationFamily, DegradationSpec
from app.observability.observability_manager import ObservabilityManager
from app.utils.image_io import load_image, load_label_map, quantize, save_image, save_label_map

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
SIDECAR_NAME = "dataset.json"
SEGMENTER_NAME = "segmenter.pt"
SUBDIRS = ("degraded", "degraded_seg", "gt_image", "gt_seg")


def record_seed(spec: DegradationSpec, clean_index: int) -> int:
    """Per-record stream derived from (spec seed, clean image index)."""
    state = np.random.SeedSequence([spec.seed, clean_index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def reflection_layer(pairs: Sequence[tuple[Image, LabelMap]], clean_index: int) -> Image:
    """The next clean image, mirrored horizontally."""
    source = pairs[(clean_index + 1) % len(pairs)][0]
    return Image(source.data[:, ::-1, :])


def write_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as f:
            for record in manifest.records:
                f.write(record.model_dump_json() + "\n")
    except OSError as e:
        raise DatasetIOError("Cannot write manifest", path) from e
    return path


def read_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    records = []
    try:
        with path.open("r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(ManifestRecord.model_validate_json(line))
                except ValidationError as e:
                    raise DatasetIOError(f"Malformed manifest line {line_no}: {e}", path) from e
    except OSError as e:
        raise DatasetIOError("Cannot read manifest", path) from e

    manifest = DatasetManifest(records=sorted(records, key=lambda r: r.index))
    _check_disjoint(manifest, path)
    if check_files:
        root = path.parent
        for record in manifest.records:
            for rel in (record.degraded, record.degraded_seg, record.gt_image, record.gt_seg):
                if not (root / rel).is_file():
                    raise DatasetIOError("Manifest references a missing file", root / rel)
    return manifest


def _check_disjoint(manifest: DatasetManifest, path: Path) -> None:
    owner: dict[int, Split] = {}
    for record in manifest.records:
        previous = owner.setdefault(record.clean_index, record.split)
        if previous != record.split:
            raise DatasetIOError(
                f"Clean image {record.clean_index} appears in both {previous.value} and {record.split.value}", path
            )


def build_dataset(
    cfg: ToyDatasetConfig,
    specs: Sequence[DegradationSpec],
    seg: Segmenter,
    out_dir: str | Path,
    pairs: Sequence[tuple[Image, LabelMap]] | None = None,
    observability: ObservabilityManager | None = None,
    run_id: str = "",
) -> DatasetManifest:
    """Write (I_d, S_d, I_gt, S_gt) for every clean pair and spec; record index = i * len(specs) + j."""
    start = time.perf_counter()
    out_dir = Path(out_dir)
    for sub in SUBDIRS:
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    pairs = list(pairs) if pairs is not None else generate_toy_dataset(cfg)

    records: list[ManifestRecord] = []
    for i, (gt_image, gt_seg) in enumerate(pairs):
        split = cfg.split_of(i)
        for j, base_spec in enumerate(specs):
            index = i * len(specs) + j
            spec = base_spec.model_copy(update={"seed": record_seed(base_spec, i)})
            aux = reflection_layer(pairs, i) if spec.family == DegradationFamily.REFLECTION else None
            # S_d is computed on exactly what gets stored
            degraded = quantize(degradations.apply(spec, gt_image, aux))
            degraded_seg = produce_degraded_segmentation(seg, degraded)

            name = f"{index:06d}.png"
            paths = {sub: f"{sub}/{name}" for sub in SUBDIRS}
            save_image(degraded, out_dir / paths["degraded"])
            save_label_map(degraded_seg, out_dir / paths["degraded_seg"])
            save_image(gt_image, out_dir / paths["gt_image"])
            save_label_map(gt_seg, out_dir / paths["gt_seg"])

            records.append(
                ManifestRecord(
                    index=index,
                    clean_index=i,
                    split=split,
                    degraded=paths["degraded"],
                    degraded_seg=paths["degraded_seg"],
                    gt_image=paths["gt_image"],
                    gt_seg=paths["gt_seg"],
                    degradation=spec,
                    num_classes=cfg.num_classes,
                    codec=degradations.codec_identity() if spec.family == DegradationFamily.JPEG_COMPRESSION else None,
                )
            )

    manifest = DatasetManifest(records=records)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    save_segmenter(seg, out_dir / SEGMENTER_NAME)
    sidecar = {
        "config": cfg.model_dump(mode="json"),
        "specs": [s.model_dump(mode="json") for s in specs],
        "records": len(records),
        "segmenter": SEGMENTER_NAME,
    }
    try:
        (out_dir / SIDECAR_NAME).write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    except OSError as e:
        raise DatasetIOError("Cannot write dataset sidecar", out_dir / SIDECAR_NAME) from e

    latency_ms = (time.perf_counter() - start) * 1000
    if observability is not None:
        observability.log_dataset_built(str(out_dir), len(records), latency_ms, run_id)
    else:
        logger.info("Built %d records in %s (%.0fms)", len(records), out_dir, latency_ms)
    return manifest


def load_sample(root: str | Path, record: ManifestRecord) -> QuadrupleSample:
    root = Path(root)
    k = record.num_classes
    sample = QuadrupleSample(
        degraded=load_image(root / record.degraded),
        degraded_seg=load_label_map(root / record.degraded_seg, k),
        gt_image=load_image(root / record.gt_image),
        gt_seg=load_label_map(root / record.gt_seg, k),
        degradation=record.degradation,
    )
    try:
        return validate_sample(sample)
    except SampleValidationError as e:
        raise DatasetIOError(f"Record {record.index} failed validation: {e}", root / record.degraded) from e


class QuadrupleDataset(torch.utils.data.Dataset):
    """Samples of one manifest split, loaded eagerly so batches are cheap to draw."""

    def __init__(self, manifest_path: str | Path, split: Split | str = Split.TRAIN):
        path = Path(manifest_path)
        self.root = path if path.is_dir() else path.parent
        self.manifest = read_manifest(path)
        self.split = Split(split)
        self.records = self.manifest.split(self.split)
        self.samples = [load_sample(self.root, r) for r in self.records]
        self.num_classes = self.manifest.num_classes
        logger.info("Loaded %d %s samples from %s", len(self.samples), self.split.value, self.root)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> QuadrupleSample:
        return self.samples[index]

    def tensors(self) -> "TrainingTensors":
        return TrainingTensors.from_samples(self.samples, self.num_classes)


@dataclass(frozen=True)
class TrainingTensors:
    """Stacked NCHW images and NHW label maps of one split."""

    degraded: torch.Tensor
    degraded_seg: torch.Tensor
    gt_image: torch.Tensor
    gt_seg: torch.Tensor
    num_classes: int

    @classmethod
    def from_samples(cls, samples: Sequence[QuadrupleSample], num_classes: int) -> "TrainingTensors":
        if not samples:
            raise DatasetIOError("Split holds no samples")

        def images(attr: str) -> torch.Tensor:
            return torch.from_numpy(np.stack([getattr(s, attr).data.transpose(2, 0, 1) for s in samples])).float()

        def labels(attr: str) -> torch.Tensor:
            return torch.from_numpy(np.stack([getattr(s, attr).data for s in samples])).long()

        return cls(
            degraded=images("degraded"),
            degraded_seg=labels("degraded_seg"),
            gt_image=images("gt_image"),
            gt_seg=labels("gt_seg"),
            num_classes=num_classes,
        )

    def __len__(self) -> int:
        return int(self.degraded.shape[0])

    def batch(self, indices: torch.Tensor) -> "TrainingTensors":
        return TrainingTensors(
            degraded=self.degraded[indices],
            degraded_seg=self.degraded_seg[indices],
            gt_image=self.gt_image[indices],
            gt_seg=self.gt_seg[indices],
            num_classes=self.num_classes,
        )
