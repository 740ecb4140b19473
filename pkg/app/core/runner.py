"""End-to-end entry points: run the full training schedule, evaluate a checkpoint."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from app.config import Settings, get_settings
from app.core.checkpoint import LATEST_NAME, TrainState, init_train_state, load_checkpoint, state_from_payload
from app.core.dataset_builder import SEGMENTER_NAME, QuadrupleDataset
from app.core.errors import CheckpointError, FrozenWeightsError
from app.core.evaluator import Evaluator, write_metrics_csv
from app.core.feature_extractor import build_feature_extractor, feature_extractor_from_spec
from app.core.pipeline import CooperativePipeline, OraclePipeline
from app.core.segmenter import load_segmenter
from app.core.tensors import state_checksum
from app.core.trainer import CooperativeTrainer
from app.models.dataset import Split
from app.models.evaluation import Guidance, MetricsTable
from app.models.training import TrainingConfig
from app.observability.observability_manager import ObservabilityManager

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    state: TrainState
    checkpoint_path: Path
    log_path: Path
    metrics: MetricsTable | None


def _manifest_root(manifest_path: str | Path) -> Path:
    path = Path(manifest_path)
    return path if path.is_dir() else path.parent


def run(
    config: TrainingConfig,
    manifest_path: str | Path,
    out_dir: str | Path,
    resume: str | Path | None = None,
    settings: Settings | None = None,
    observability: ObservabilityManager | None = None,
    run_id: str = "",
) -> RunResult:
    """Stages 1 -> 2 -> 3, checkpoints, CSV log and a final val evaluation.

    On resume the checkpoint's own config wins over ``config``.
    """
    settings = settings or get_settings()
    out_dir = Path(out_dir)
    train = QuadrupleDataset(manifest_path, Split.TRAIN)
    data = train.tensors()

    if resume is not None:
        state = state_from_payload(load_checkpoint(resume), settings.device)
        if state.num_classes != train.num_classes:
            raise CheckpointError(f"Checkpoint has K={state.num_classes}, dataset has K={train.num_classes}")
        extractor = feature_extractor_from_spec(state.feature_extractor_spec)
        trainer = CooperativeTrainer(extractor, out_dir, observability, run_id, settings.device)
        trainer.log.truncate(state.iteration)
        logger.info("Resuming from %s at stage %s iteration %d", resume, state.stage.value, state.iteration)
    else:
        segmenter_path = _manifest_root(manifest_path) / SEGMENTER_NAME
        segmenter = load_segmenter(segmenter_path) if segmenter_path.is_file() else None
        extractor = build_feature_extractor(settings)
        state = init_train_state(config, train.num_classes, segmenter, extractor.spec, settings.device)
        trainer = CooperativeTrainer(extractor, out_dir, observability, run_id, settings.device)
        trainer.save_initial(state)

    frozen_before = (state_checksum(extractor), state_checksum(state.segmenter) if state.segmenter else None)
    state = trainer.run_all(state, data)
    frozen_after = (state_checksum(extractor), state_checksum(state.segmenter) if state.segmenter else None)
    if frozen_before != frozen_after:
        raise FrozenWeightsError("Feature extractor or segmenter weights changed during training")

    metrics = None
    val_path = _manifest_root(manifest_path)
    val = QuadrupleDataset(val_path, Split.VAL)
    if len(val):
        evaluator = Evaluator(CooperativePipeline.from_state(state), state.segmenter, observability, run_id)
        metrics = evaluator.evaluate(val)
        write_metrics_csv(metrics, out_dir / "metrics_val.csv")
    else:
        logger.warning("Manifest has no val split; skipping final evaluation")
    return RunResult(state, out_dir / LATEST_NAME, trainer.log.path, metrics)


def evaluate(
    checkpoint: str | Path | None,
    manifest_path: str | Path,
    split: Split | str = Split.VAL,
    guidance: Guidance = Guidance.REFINED,
    oracle: bool = False,
    out_dir: str | Path | None = None,
    grids: bool = True,
    settings: Settings | None = None,
    observability: ObservabilityManager | None = None,
    run_id: str = "",
) -> MetricsTable:
    settings = settings or get_settings()
    dataset = QuadrupleDataset(manifest_path, split)
    if oracle:
        pipeline, segmenter = OraclePipeline(), None
    else:
        if checkpoint is None:
            raise CheckpointError("A checkpoint is required unless the oracle pipeline is used")
        state = state_from_payload(load_checkpoint(checkpoint), settings.device)
        pipeline, segmenter = CooperativePipeline.from_state(state, guidance), state.segmenter
    grid_dir = Path(out_dir) / "grids" if (out_dir is not None and grids) else None
    table = Evaluator(pipeline, segmenter, observability, run_id).evaluate(dataset, grid_dir)
    if out_dir is not None:
        write_metrics_csv(table, Path(out_dir) / f"metrics_{dataset.split.value}.csv")
    return table
