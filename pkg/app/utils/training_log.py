from __future__ import annotations

import csv
import logging
from pathlib import Path

from app.core.errors import DatasetIOError
from app.core.losses import LOSS_TERMS, LossReport

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("iteration", "stage", *LOSS_TERMS)


class TrainingLog:
    """Per-iteration CSV of every loss term; one row per iteration."""

    def __init__(self, path: str | Path):
        self._path = Path(path)

    @property
    def path(self) -> Path:
        return self._path

    def start(self) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._write_rows([])

    def append(self, iteration: int, stage: str, report: LossReport) -> None:
        try:
            with self._path.open("a", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow([iteration, stage, *report.as_row()])
        except OSError as e:
            raise DatasetIOError("Cannot append to training log", self._path) from e

    def rows(self) -> list[dict[str, str]]:
        if not self._path.is_file():
            return []
        with self._path.open("r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))

    def truncate(self, last_iteration: int) -> int:
        """Drop rows past ``last_iteration``; returns how many were removed."""
        rows = self.rows()
        kept = [r for r in rows if int(r["iteration"]) <= last_iteration]
        self._write_rows(kept)
        removed = len(rows) - len(kept)
        if removed:
            logger.info("Truncated %d log rows past iteration %d", removed, last_iteration)
        return removed

    def _write_rows(self, rows: list[dict[str, str]]) -> None:
        try:
            with self._path.open("w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=LOG_COLUMNS)
                writer.writeheader()
                writer.writerows(rows)
        except OSError as e:
            raise DatasetIOError("Cannot write training log", self._path) from e
