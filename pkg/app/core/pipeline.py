"""Inference: degraded sample -> refined segmentation and restored image."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import torch

from app.core.checkpoint import TrainState
from app.core.errors import ArgumentError
from app.core.networks import RefinementNet, RestorationNet, refine, restore
from app.core.samples import Image, LabelMap, QuadrupleSample, SoftLabelMap, decode_labels, encode_labels
from app.core.segmenter import Segmenter
from app.models.evaluation import Guidance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineOutput:
    refined_seg: LabelMap
    restored: Image
    refined_soft: SoftLabelMap | None = None


class RestorationPipeline(Protocol):
    def process(self, sample: QuadrupleSample) -> PipelineOutput: ...


class CooperativePipeline:
    """G1 then G2, in eval mode."""

    def __init__(
        self,
        g1: RefinementNet,
        g2: RestorationNet,
        guidance: Guidance = Guidance.REFINED,
        segmenter: Segmenter | None = None,
    ):
        self._g1 = g1.eval()
        self._g2 = g2.eval()
        self._guidance = Guidance(guidance)
        self._segmenter = segmenter
        self.num_classes = g1.num_classes

    @classmethod
    def from_state(cls, state: TrainState, guidance: Guidance = Guidance.REFINED) -> "CooperativePipeline":
        return cls(state.g1, state.g2, guidance, state.segmenter)

    @property
    def has_segmenter(self) -> bool:
        return self._segmenter is not None

    def auto_segment(self, image: Image) -> LabelMap:
        """Degraded segmentation from the bundled clean-condition segmenter."""
        if self._segmenter is None:
            raise ArgumentError("No segmenter is bundled with this checkpoint")
        return self._segmenter.predict(image)

    def refine(self, degraded_seg: LabelMap, degraded: Image) -> SoftLabelMap:
        return refine(self._g1, encode_labels(degraded_seg, self.num_classes), degraded)

    def restore(self, seg: SoftLabelMap, degraded: Image) -> Image:
        return restore(self._g2, seg, degraded)

    @torch.no_grad()
    def run(self, degraded: Image, degraded_seg: LabelMap) -> PipelineOutput:
        soft = self.refine(degraded_seg, degraded)
        if self._guidance == Guidance.REFINED:
            guide = soft
        else:
            guide = encode_labels(degraded_seg, self.num_classes)
        return PipelineOutput(refined_seg=decode_labels(soft), restored=self.restore(guide, degraded), refined_soft=soft)

    def process(self, sample: QuadrupleSample) -> PipelineOutput:
        return self.run(sample.degraded, sample.degraded_seg)


class OraclePipeline:
    """Returns the ground truth; an upper bound for every metric."""

    def process(self, sample: QuadrupleSample) -> PipelineOutput:
        return PipelineOutput(refined_seg=sample.gt_seg, restored=sample.gt_image)
