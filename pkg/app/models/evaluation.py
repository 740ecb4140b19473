from __future__ import annotations

import enum
import math

from pydantic import BaseModel, Field

METRIC_COLUMNS = ["family", "severity", "PA", "mPA", "mIoU", "FWIoU", "PSNR", "SSIM"]


class SegScores(BaseModel):
    pa: float = Field(ge=0, le=1)
    mpa: float = Field(ge=0, le=1)
    miou: float = Field(ge=0, le=1)
    fwiou: float = Field(ge=0, le=1)

    model_config = {"frozen": True}


class MetricsRow(BaseModel):
    family: str
    severity: str
    scores: SegScores
    psnr: float | None = None
    ssim: float | None = None
    samples: int = 0

    def as_csv_row(self) -> list[str]:
        return [
            self.family,
            self.severity,
            f"{self.scores.pa:.4f}",
            f"{self.scores.mpa:.4f}",
            f"{self.scores.miou:.4f}",
            f"{self.scores.fwiou:.4f}",
            _format_psnr(self.psnr),
            "-" if self.ssim is None else f"{self.ssim:.4f}",
        ]


class MetricsTable(BaseModel):
    split: str
    rows: list[MetricsRow] = Field(default_factory=list)

    def row(self, family: str, severity: str) -> MetricsRow | None:
        for r in self.rows:
            if r.family == family and r.severity == severity:
                return r
        return None

    def render(self) -> str:
        lines = [" ".join(f"{c:>10s}" for c in METRIC_COLUMNS)]
        lines.append("-" * len(lines[0]))
        for r in self.rows:
            lines.append(" ".join(f"{c:>10s}" for c in r.as_csv_row()))
        return "\n".join(lines)


def _format_psnr(value: float | None) -> str:
    if value is None:
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{value:.2f}"


class Guidance(str, enum.Enum):
    """Segmentation handed to the restoration network at evaluation time."""

    REFINED = "refined"
    DEGRADED = "degraded"
