from __future__ import annotations

import logging
import uuid

import logfire

from app.config import Settings, get_settings

logger = logging.getLogger(__name__)


class ObservabilityManager:
    """Structured logging and monitoring via Logfire."""

    def __init__(self, settings: Settings | None = None):
        self._settings = settings or get_settings()
        self._configured = False
        self._configure()

    def _configure(self) -> None:
        if self._configured:
            return
        if self._settings.logfire_token:
            logfire.configure(token=self._settings.logfire_token)
            self._configured = True
        else:
            logger.warning("Logfire token not set; observability will use stdlib logging only")

    @staticmethod
    def generate_run_id() -> str:
        return str(uuid.uuid4())

    def should_log_iteration(self, iteration: int) -> bool:
        interval = max(1, self._settings.log_interval)
        return iteration % interval == 0

    def log_iteration(self, stage: str, iteration: int, totals: dict[str, float], run_id: str) -> None:
        data = {
            "event": "training_iteration",
            "stage": stage,
            "iteration": iteration,
            "run_id": run_id,
            **{k: round(v, 6) for k, v in totals.items()},
        }
        if self._configured:
            logfire.info("Stage {stage} iteration {iteration}", **data)
        summary = " ".join(f"{k}={v:.4f}" for k, v in totals.items())
        logger.info("train stage=%s it=%d %s run=%s", stage, iteration, summary, run_id)

    def log_stage_transition(self, from_stage: str, to_stage: str, iteration: int, run_id: str) -> None:
        data = {
            "event": "stage_transition",
            "from_stage": from_stage,
            "to_stage": to_stage,
            "iteration": iteration,
            "run_id": run_id,
        }
        if self._configured:
            logfire.info("Stage {from_stage} -> {to_stage} at iteration {iteration}", **data)
        logger.info("stage %s -> %s at it=%d run=%s", from_stage, to_stage, iteration, run_id)

    def log_checkpoint(self, path: str, stage: str, iteration: int, latency_ms: float, run_id: str) -> None:
        data = {
            "event": "checkpoint_saved",
            "path": path,
            "stage": stage,
            "iteration": iteration,
            "latency_ms": round(latency_ms, 2),
            "run_id": run_id,
        }
        if self._configured:
            logfire.info("Checkpoint {path} ({latency_ms}ms)", **data)
        logger.info("checkpoint %s stage=%s it=%d latency=%.2fms run=%s", path, stage, iteration, latency_ms, run_id)

    def log_segmenter_epoch(self, epoch: int, mean_loss: float, run_id: str) -> None:
        data = {"event": "segmenter_epoch", "epoch": epoch, "mean_loss": round(mean_loss, 6), "run_id": run_id}
        if self._configured:
            logfire.info("Segmenter epoch {epoch}: loss {mean_loss}", **data)
        logger.info("segmenter epoch=%d loss=%.4f run=%s", epoch, mean_loss, run_id)

    def log_dataset_built(self, out_dir: str, records: int, latency_ms: float, run_id: str) -> None:
        data = {
            "event": "dataset_built",
            "out_dir": out_dir,
            "records": records,
            "latency_ms": round(latency_ms, 2),
            "run_id": run_id,
        }
        if self._configured:
            logfire.info("Dataset {out_dir}: {records} records ({latency_ms}ms)", **data)
        logger.info("dataset out=%s records=%d latency=%.2fms run=%s", out_dir, records, latency_ms, run_id)

    def log_evaluation(self, split: str, rows: int, samples: int, latency_ms: float, run_id: str) -> None:
        data = {
            "event": "evaluation",
            "split": split,
            "rows": rows,
            "samples": samples,
            "latency_ms": round(latency_ms, 2),
            "run_id": run_id,
        }
        if self._configured:
            logfire.info("Evaluation on {split}: {samples} samples, {rows} rows ({latency_ms}ms)", **data)
        logger.info(
            "evaluation split=%s samples=%d rows=%d latency=%.2fms run=%s",
            split, samples, rows, latency_ms, run_id,
        )

    def log_error(self, error: Exception, run_id: str, context: dict | None = None) -> None:
        data = {
            "event": "error",
            "error_type": type(error).__name__,
            "error_message": str(error),
            "run_id": run_id,
            **(context or {}),
        }
        if self._configured:
            logfire.error("Error: {error_type}: {error_message}", **data)
        logger.error("error %s: %s run=%s", type(error).__name__, error, run_id)
