from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from app.core.dataset_builder import QuadrupleDataset
from app.core.errors import DatasetIOError
from app.core.metrics import ConfusionMatrix, confusion_matrix, psnr, seg_scores, ssim
from app.core.pipeline import RestorationPipeline
from app.core.segmenter import Segmenter
from app.models.evaluation import METRIC_COLUMNS, MetricsRow, MetricsTable
from app.observability.observability_manager import ObservabilityManager
from app.utils.visualization import save_grid

logger = logging.getLogger(__name__)

ORIGINAL_ROW = "Original"
REFINED_SUFFIX = "_Re"


@dataclass
class _Accumulator:
    cm: ConfusionMatrix
    psnr: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)

    def add(self, cm: ConfusionMatrix, psnr_value: float | None = None, ssim_value: float | None = None) -> None:
        self.cm = self.cm + cm
        if psnr_value is not None:
            self.psnr.append(psnr_value)
        if ssim_value is not None:
            self.ssim.append(ssim_value)

    def row(self, family: str, severity: str, samples: int) -> MetricsRow:
        return MetricsRow(
            family=family,
            severity=severity,
            scores=seg_scores(self.cm),
            psnr=_mean_or_none(self.psnr),
            ssim=_mean_or_none(self.ssim),
            samples=samples,
        )


def _mean_or_none(values: list[float]) -> float | None:
    if not values:
        return None
    if any(math.isinf(v) for v in values):
        return math.inf
    return float(np.mean(values))


class Evaluator:
    """Paired degraded / refined rows per degradation family and severity."""

    def __init__(
        self,
        pipeline: RestorationPipeline,
        segmenter: Segmenter | None = None,
        observability: ObservabilityManager | None = None,
        run_id: str = "",
    ):
        self._pipeline = pipeline
        self._segmenter = segmenter
        self._observability = observability
        self._run_id = run_id

    def evaluate(self, dataset: QuadrupleDataset, grid_dir: str | Path | None = None) -> MetricsTable:
        if len(dataset) == 0:
            raise DatasetIOError(f"Split '{dataset.split.value}' is absent from the manifest", dataset.root)
        start = time.perf_counter()
        k = dataset.num_classes
        groups: dict[tuple[str, str], tuple[_Accumulator, _Accumulator]] = {}
        counts: dict[tuple[str, str], int] = {}
        original = _Accumulator(ConfusionMatrix.empty(k))
        seen_clean: set[int] = set()

        for record, sample in zip(dataset.records, dataset.samples):
            out = self._pipeline.process(sample)
            key = (record.degradation.family.label, str(record.degradation.severity_index))
            degraded_acc, refined_acc = groups.setdefault(
                key, (_Accumulator(ConfusionMatrix.empty(k)), _Accumulator(ConfusionMatrix.empty(k)))
            )
            counts[key] = counts.get(key, 0) + 1
            degraded_acc.add(
                confusion_matrix(sample.degraded_seg, sample.gt_seg, k),
                psnr(sample.degraded, sample.gt_image),
                ssim(sample.degraded, sample.gt_image),
            )
            refined_acc.add(
                confusion_matrix(out.refined_seg, sample.gt_seg, k),
                psnr(out.restored, sample.gt_image),
                ssim(out.restored, sample.gt_image),
            )
            if self._segmenter is not None and record.clean_index not in seen_clean:
                seen_clean.add(record.clean_index)
                original.add(confusion_matrix(self._segmenter.predict(sample.gt_image), sample.gt_seg, k))
            if grid_dir is not None:
                save_grid(
                    [sample.degraded, sample.degraded_seg, out.refined_seg, out.restored, sample.gt_image],
                    Path(grid_dir) / f"{record.index:06d}.png",
                )

        rows: list[MetricsRow] = []
        if self._segmenter is not None:
            rows.append(original.row(ORIGINAL_ROW, "-", len(seen_clean)))
        for (label, severity), (degraded_acc, refined_acc) in groups.items():
            rows.append(degraded_acc.row(label, severity, counts[(label, severity)]))
            rows.append(refined_acc.row(label + REFINED_SUFFIX, severity, counts[(label, severity)]))
        table = MetricsTable(split=dataset.split.value, rows=rows)

        latency_ms = (time.perf_counter() - start) * 1000
        if self._observability is not None:
            self._observability.log_evaluation(table.split, len(rows), len(dataset), latency_ms, self._run_id)
        return table


def write_metrics_csv(table: MetricsTable, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(METRIC_COLUMNS)
            for row in table.rows:
                writer.writerow(row.as_csv_row())
    except OSError as e:
        raise DatasetIOError("Cannot write metrics table", path) from e
    return path
