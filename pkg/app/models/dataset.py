from __future__ import annotations

import enum

from pydantic import BaseModel, Field, model_validator

from app.models.degradation import DegradationSpec


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class ToyDatasetConfig(BaseModel):
    model_config = {"extra": "forbid"}

    n_samples: int = Field(default=600, ge=1)
    image_size: int = Field(default=64, ge=32)
    num_classes: int = Field(default=4, ge=2, le=16)
    min_shapes: int = Field(default=1, ge=0)
    max_shapes: int = Field(default=4, ge=0)
    n_val: int = Field(default=100, ge=0)
    n_test: int = Field(default=0, ge=0)
    seed: int = 7

    @model_validator(mode="after")
    def _check_ranges(self) -> "ToyDatasetConfig":
        if self.min_shapes > self.max_shapes:
            raise ValueError("min_shapes must not exceed max_shapes")
        if self.n_val + self.n_test >= self.n_samples:
            raise ValueError("n_val + n_test must leave at least one training sample")
        return self

    def split_of(self, index: int) -> Split:
        n_train = self.n_samples - self.n_val - self.n_test
        if index < n_train:
            return Split.TRAIN
        if index < n_train + self.n_val:
            return Split.VAL
        return Split.TEST


class ManifestRecord(BaseModel):
    index: int
    clean_index: int
    split: Split
    degraded: str
    degraded_seg: str
    gt_image: str
    gt_seg: str
    degradation: DegradationSpec
    num_classes: int
    codec: str | None = None


class DatasetManifest(BaseModel):
    records: list[ManifestRecord] = Field(default_factory=list)

    def split(self, split: Split | str) -> list[ManifestRecord]:
        split = Split(split)
        return [r for r in self.records if r.split == split]

    @property
    def num_classes(self) -> int:
        if not self.records:
            return 0
        return self.records[0].num_classes
