from __future__ import annotations

import enum

from pydantic import BaseModel, Field, field_validator


class DegradationFamily(str, enum.Enum):
    GAUSSIAN_BLUR = "GaussianBlur"
    GAUSSIAN_NOISE = "GaussianNoise"
    JPEG_COMPRESSION = "JpegCompression"
    CHROMATIC_ABERRATION = "ChromaticAberration"
    REFLECTION = "Reflection"

    @property
    def code(self) -> str:
        return FAMILY_CODES[self]

    @property
    def label(self) -> str:
        return FAMILY_LABELS[self]

    @classmethod
    def from_code(cls, code: str) -> "DegradationFamily":
        for family, family_code in FAMILY_CODES.items():
            if family_code == code.lower():
                return family
        return cls(code)


FAMILY_CODES: dict[DegradationFamily, str] = {
    DegradationFamily.GAUSSIAN_BLUR: "gb",
    DegradationFamily.GAUSSIAN_NOISE: "gn",
    DegradationFamily.JPEG_COMPRESSION: "jpeg",
    DegradationFamily.CHROMATIC_ABERRATION: "ca",
    DegradationFamily.REFLECTION: "reflect",
}

# Row labels of the metrics table
FAMILY_LABELS: dict[DegradationFamily, str] = {
    DegradationFamily.GAUSSIAN_BLUR: "GB",
    DegradationFamily.GAUSSIAN_NOISE: "GN",
    DegradationFamily.JPEG_COMPRESSION: "JPEG",
    DegradationFamily.CHROMATIC_ABERRATION: "CA",
    DegradationFamily.REFLECTION: "RF",
}

NUM_SEVERITIES = 4

# Four-level parameter lists, indexed by severity_index
SEVERITY_TABLES: dict[DegradationFamily, dict[str, tuple[float, ...] | tuple[int, ...]]] = {
    DegradationFamily.GAUSSIAN_BLUR: {"sigma": (1.2, 2.5, 6.5, 15.2)},
    DegradationFamily.GAUSSIAN_NOISE: {"variance": (0.05, 0.09, 0.13, 0.2)},
    DegradationFamily.JPEG_COMPRESSION: {"quality": (43, 12, 7, 4)},
    DegradationFamily.CHROMATIC_ABERRATION: {"shift_r": (2, 6, 10, 14), "shift_b": (1, 3, 5, 7)},
    DegradationFamily.REFLECTION: {
        "alpha": (0.9, 0.8, 0.7, 0.6),
        "blur_sigma": (3.0, 3.0, 3.0, 3.0),
        "alpha_jitter": (0.05, 0.05, 0.05, 0.05),
    },
}


class DegradationSpec(BaseModel):
    family: DegradationFamily
    severity_index: int = Field(default=0, ge=0, le=NUM_SEVERITIES - 1)
    params: dict[str, float | int] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {"frozen": True}

    @field_validator("params")
    @classmethod
    def _known_params(cls, value: dict[str, float | int], info) -> dict[str, float | int]:
        family = info.data.get("family")
        if family is not None:
            unknown = set(value) - set(SEVERITY_TABLES[family])
            if unknown:
                raise ValueError(f"Unknown parameters for {family.value}: {sorted(unknown)}")
        return value

    def resolved_params(self) -> dict[str, float | int]:
        """Severity-table values with explicit overrides applied."""
        table = SEVERITY_TABLES[self.family]
        resolved = {name: values[self.severity_index] for name, values in table.items()}
        resolved.update(self.params)
        return resolved

    def describe(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.resolved_params().items())
        return f"{self.family.value}[severity={self.severity_index}] ({params}) seed={self.seed}"
