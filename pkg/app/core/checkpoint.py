"""Training state and its on-disk checkpoint form."""

from __future__ import annotations

import logging
import sys
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch
import torch.nn as nn

from app.core.errors import CheckpointError
from app.core.networks import RefinementNet, RestorationNet, image_discriminator, segmentation_discriminator
from app.core.segmenter import Segmenter, segmenter_from_payload, segmenter_payload
from app.models.training import OptimizerSettings, Stage, TrainingConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
LATEST_NAME = "checkpoint.pt"
DIVERGED_NAME = "diverged.pt"
NETWORK_NAMES = ("g1", "g2", "d1", "d2")


def stage_end_name(stage: Stage) -> str:
    return f"stage{stage.value}_end.pt"


@dataclass
class TrainState:
    """Everything needed to continue training bit-for-bit."""

    config: TrainingConfig
    num_classes: int
    stage: Stage
    iteration: int
    networks: dict[str, nn.Module]
    optimizers: dict[str, torch.optim.Optimizer]
    generator: torch.Generator
    boundaries: list[int] = field(default_factory=list)
    segmenter: Segmenter | None = None
    feature_extractor_spec: dict[str, Any] = field(default_factory=dict)

    @property
    def g1(self) -> RefinementNet:
        return self.networks["g1"]

    @property
    def g2(self) -> RestorationNet:
        return self.networks["g2"]

    @property
    def d1(self) -> nn.Module:
        return self.networks["d1"]

    @property
    def d2(self) -> nn.Module:
        return self.networks["d2"]

    def stage_end(self, stage: Stage | None = None) -> int:
        """Global iteration at which ``stage`` (default: current) finishes."""
        stage = stage or self.stage
        cfg = self.config
        ends = {Stage.REFINEMENT: cfg.n1, Stage.RESTORATION: cfg.n1 + cfg.n2, Stage.JOINT: cfg.total_iterations}
        return ends.get(stage, cfg.total_iterations)


def _adam(module: nn.Module, settings: OptimizerSettings) -> torch.optim.Optimizer:
    return torch.optim.Adam(module.parameters(), lr=settings.lr, betas=(settings.beta1, settings.beta2))


def build_networks(config: TrainingConfig, num_classes: int) -> dict[str, nn.Module]:
    net = config.networks
    return {
        "g1": RefinementNet(num_classes, net.generator_width, net.generator_depth),
        "g2": RestorationNet(num_classes, net.generator_width, net.generator_depth, net.exemplar_skip),
        "d1": segmentation_discriminator(num_classes, net.discriminator_width, net.discriminator_blocks),
        "d2": image_discriminator(net.discriminator_width, net.discriminator_blocks, net.d2_spectral_norm),
    }


def build_optimizers(config: TrainingConfig, networks: dict[str, nn.Module]) -> dict[str, torch.optim.Optimizer]:
    settings = {
        "g1": config.g1_optimizer,
        "g2": config.g2_optimizer,
        "d1": config.d1_optimizer,
        "d2": config.d2_optimizer,
    }
    return {name: _adam(networks[name], settings[name]) for name in NETWORK_NAMES}


def init_train_state(
    config: TrainingConfig,
    num_classes: int,
    segmenter: Segmenter | None = None,
    feature_extractor_spec: dict[str, Any] | None = None,
    device: str | torch.device = "cpu",
) -> TrainState:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        networks = build_networks(config, num_classes)
    networks = {name: module.to(device) for name, module in networks.items()}
    return TrainState(
        config=config,
        num_classes=num_classes,
        stage=Stage.REFINEMENT,
        iteration=0,
        networks=networks,
        optimizers=build_optimizers(config, networks),
        generator=torch.Generator().manual_seed(config.seed),
        segmenter=segmenter,
        feature_extractor_spec=dict(feature_extractor_spec or {}),
    )


def state_payload(state: TrainState) -> dict[str, Any]:
    return {
        "format_version": CHECKPOINT_FORMAT,
        "config": state.config.model_dump(mode="json"),
        "num_classes": state.num_classes,
        "stage": state.stage.value,
        "iteration": state.iteration,
        "boundaries": list(state.boundaries),
        "seed": state.config.seed,
        "networks": {name: state.networks[name].state_dict() for name in NETWORK_NAMES},
        "optimizers": {name: state.optimizers[name].state_dict() for name in NETWORK_NAMES},
        "rng": state.generator.get_state(),
        "segmenter": segmenter_payload(state.segmenter) if state.segmenter is not None else None,
        "feature_extractor": dict(state.feature_extractor_spec),
    }


def canonical_payload(value: Any) -> Any:
    """Fresh containers with interned strings.

    Pickle memoizes by object identity, so a live state and the same state
    reloaded from disk would otherwise serialize to different bytes.
    """
    if type(value) is str:
        return sys.intern(value)
    if isinstance(value, OrderedDict):
        out = OrderedDict((canonical_payload(k), canonical_payload(v)) for k, v in value.items())
        metadata = getattr(value, "_metadata", None)
        if metadata is not None:
            out._metadata = canonical_payload(metadata)
        return out
    if isinstance(value, dict):
        return {canonical_payload(k): canonical_payload(v) for k, v in value.items()}
    if isinstance(value, list):
        return [canonical_payload(v) for v in value]
    if isinstance(value, tuple):
        return tuple(canonical_payload(v) for v in value)
    return value


def save_checkpoint(state: TrainState, path: str | Path) -> tuple[Path, float]:
    """Write the state; returns (path, latency in ms)."""
    start = time.perf_counter()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        torch.save(canonical_payload(state_payload(state)), path)
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e
    return path, (time.perf_counter() - start) * 1000


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a format-{CHECKPOINT_FORMAT} checkpoint")
    return payload


def state_from_payload(payload: dict[str, Any], device: str | torch.device = "cpu") -> TrainState:
    try:
        config = TrainingConfig.model_validate(payload["config"])
        num_classes = int(payload["num_classes"])
        networks = build_networks(config, num_classes)
        for name in NETWORK_NAMES:
            networks[name].load_state_dict(payload["networks"][name])
            networks[name].to(device)
        optimizers = build_optimizers(config, networks)
        for name in NETWORK_NAMES:
            optimizers[name].load_state_dict(payload["optimizers"][name])
        generator = torch.Generator()
        generator.set_state(payload["rng"])
        segmenter = segmenter_from_payload(payload["segmenter"]) if payload.get("segmenter") else None
        return TrainState(
            config=config,
            num_classes=num_classes,
            stage=Stage(payload["stage"]),
            iteration=int(payload["iteration"]),
            networks=networks,
            optimizers=optimizers,
            generator=generator,
            boundaries=[int(b) for b in payload["boundaries"]],
            segmenter=segmenter.to(device) if segmenter is not None else None,
            feature_extractor_spec=dict(payload.get("feature_extractor") or {}),
        )
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise CheckpointError(f"Checkpoint payload is incomplete or inconsistent: {e}") from e
