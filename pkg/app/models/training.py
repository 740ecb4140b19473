from __future__ import annotations

import enum

from pydantic import BaseModel, Field


class TVVariant(str, enum.Enum):
    CONVENTIONAL = "conventional"
    LITERAL = "literal"


class AdversarialForm(str, enum.Enum):
    LEAST_SQUARES = "ls"
    LOG = "log"


class Stage(str, enum.Enum):
    REFINEMENT = "1"
    RESTORATION = "2"
    JOINT = "3"
    DONE = "done"

    @property
    def next(self) -> "Stage":
        order = [Stage.REFINEMENT, Stage.RESTORATION, Stage.JOINT, Stage.DONE]
        return order[min(order.index(self) + 1, len(order) - 1)]


class LossWeights(BaseModel):
    model_config = {"extra": "forbid"}

    lambda_ref: float = Field(default=10.0, ge=0)
    lambda_l1: float = Field(default=10.0, ge=0)
    lambda_adv: float = Field(default=1.0, ge=0)
    lambda_perc: float = Field(default=10.0, ge=0)
    lambda_style: float = Field(default=250.0, ge=0)
    tv_weight: float = Field(default=1.0, ge=0)


class OptimizerSettings(BaseModel):
    model_config = {"extra": "forbid"}

    lr: float = Field(default=2e-4, gt=0)
    beta1: float = Field(default=0.5, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)


class NetworkSettings(BaseModel):
    model_config = {"extra": "forbid"}

    generator_width: int = Field(default=32, ge=4)
    generator_depth: int = Field(default=4, ge=2)
    discriminator_width: int = Field(default=32, ge=4)
    discriminator_blocks: int = Field(default=4, ge=1)
    d2_spectral_norm: bool = False
    exemplar_skip: bool = True


class TrainingConfig(BaseModel):
    model_config = {"extra": "forbid"}

    n1: int = Field(default=2000, ge=0)
    n2: int = Field(default=2000, ge=0)
    n3: int = Field(default=1000, ge=0)
    batch_size: int = Field(default=8, ge=1)
    seed: int = 0
    checkpoint_interval: int = Field(default=500, ge=0)
    tv_variant: TVVariant = TVVariant.CONVENTIONAL
    adversarial_form: AdversarialForm = AdversarialForm.LEAST_SQUARES
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    g1_optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    g2_optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    d1_optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    d2_optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    networks: NetworkSettings = Field(default_factory=NetworkSettings)

    def iterations_for(self, stage: Stage) -> int:
        return {Stage.REFINEMENT: self.n1, Stage.RESTORATION: self.n2, Stage.JOINT: self.n3}.get(stage, 0)

    @property
    def total_iterations(self) -> int:
        return self.n1 + self.n2 + self.n3
