"""Three-stage cooperative training of the refinement and restoration networks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from app.core.checkpoint import (
    DIVERGED_NAME,
    LATEST_NAME,
    TrainState,
    save_checkpoint,
    stage_end_name,
)
from app.core.dataset_builder import TrainingTensors
from app.core.errors import NumericError, StageOrderError, TrainingDivergedError
from app.core.feature_extractor import FeatureExtractor
from app.core.losses import (
    LossReport,
    discriminator_adversarial_loss,
    generator_adversarial_loss,
    l1_loss,
    perceptual_loss,
    refinement_loss,
    style_loss,
    total_g1_loss,
    total_g2_loss,
    tv_loss,
)
from app.core.networks import discriminate
from app.core.tensors import one_hot
from app.models.training import Stage
from app.observability.observability_manager import ObservabilityManager
from app.utils.training_log import TrainingLog

logger = logging.getLogger(__name__)

GT_ONEHOT = "gt_onehot"
SOFT_REFINED = "soft_refined"


@dataclass
class GuidanceProbe:
    """Records which segmentation G2 was fed, per stage."""

    seen: dict[str, set[str]] = field(default_factory=dict)

    def record(self, stage: Stage, kind: str, seg: torch.Tensor) -> None:
        if stage == Stage.RESTORATION:
            assert kind == GT_ONEHOT, f"stage 2 fed G2 with {kind}"
            assert not seg.requires_grad
        elif stage == Stage.JOINT:
            assert kind == SOFT_REFINED, f"stage 3 fed G2 with {kind}"
            assert seg.requires_grad and seg.is_floating_point()
        self.seen.setdefault(stage.value, set()).add(kind)


@dataclass
class Batch:
    s_d: torch.Tensor
    i_d: torch.Tensor
    s_gt: torch.Tensor
    s_gt_onehot: torch.Tensor
    i_gt: torch.Tensor


class CooperativeTrainer:
    """Runs the refinement stage, the restoration stage and the joint stage in order.

    One discriminator step then one generator step per iteration. The CSV log
    gets exactly one row per iteration.
    """

    def __init__(
        self,
        feature_extractor: FeatureExtractor,
        out_dir: str | Path | None = None,
        observability: ObservabilityManager | None = None,
        run_id: str = "",
        device: str | torch.device = "cpu",
    ):
        self._extractor = feature_extractor.to(device)
        self._out_dir = Path(out_dir) if out_dir is not None else None
        self._observability = observability
        self._run_id = run_id
        self._device = torch.device(device)
        self.probe = GuidanceProbe()
        self.log = TrainingLog(self._out_dir / "training_log.csv") if self._out_dir is not None else None
        self.history: list[tuple[int, str, LossReport]] = []

    # ------------------------------------------------------------------ batches

    def _batch(self, state: TrainState, data: TrainingTensors) -> Batch:
        indices = torch.randint(len(data), (state.config.batch_size,), generator=state.generator)
        b = data.batch(indices)
        k = state.num_classes
        to = self._device
        return Batch(
            s_d=one_hot(b.degraded_seg, k).to(to),
            i_d=b.degraded.to(to),
            s_gt=b.gt_seg.to(to),
            s_gt_onehot=one_hot(b.gt_seg, k).to(to),
            i_gt=b.gt_image.to(to),
        )

    # -------------------------------------------------------------- loss pieces

    def _d1_step(self, state: TrainState, batch: Batch, s_r: torch.Tensor) -> torch.Tensor:
        form = state.config.adversarial_form
        real = discriminate(state.d1, batch.s_gt_onehot, batch.i_d)
        fake = discriminate(state.d1, s_r.detach(), batch.i_d)
        l_d1 = discriminator_adversarial_loss(real, fake, form)
        opt = state.optimizers["d1"]
        opt.zero_grad()
        l_d1.backward()
        opt.step()
        return l_d1

    def _d2_step(self, state: TrainState, batch: Batch, i_r: torch.Tensor) -> torch.Tensor:
        form = state.config.adversarial_form
        l_d2 = discriminator_adversarial_loss(state.d2(batch.i_gt), state.d2(i_r.detach()), form)
        opt = state.optimizers["d2"]
        opt.zero_grad()
        l_d2.backward()
        opt.step()
        return l_d2

    def _g1_terms(self, state: TrainState, batch: Batch, s_r: torch.Tensor) -> dict[str, torch.Tensor]:
        adv = generator_adversarial_loss(discriminate(state.d1, s_r, batch.i_d), state.config.adversarial_form)
        ref = refinement_loss(s_r, batch.s_gt)
        return {"l_adv_g1": adv, "l_ref": ref, "l_g1": total_g1_loss(state.config.loss_weights, adv, ref)}

    def _g2_terms(self, state: TrainState, batch: Batch, i_r: torch.Tensor) -> dict[str, torch.Tensor]:
        cfg = state.config
        l1 = l1_loss(i_r, batch.i_gt)
        adv = generator_adversarial_loss(state.d2(i_r), cfg.adversarial_form)
        perc = perceptual_loss(self._extractor, i_r, batch.i_gt)
        sty = style_loss(self._extractor, i_r, batch.i_gt)
        tv = tv_loss(i_r, cfg.tv_variant)
        total = total_g2_loss(cfg.loss_weights, l1, adv, perc, sty, tv)
        return {"l_l1": l1, "l_adv_g2": adv, "l_perc": perc, "l_style": sty, "l_tv": tv, "l_g2": total}

    # ------------------------------------------------------------------ stages

    def _iteration_stage1(self, state: TrainState, batch: Batch, report: LossReport) -> None:
        s_r = state.g1(batch.s_d, batch.i_d)
        report.record(l_d1=self._d1_step(state, batch, s_r))
        terms = self._g1_terms(state, batch, s_r)
        report.record(**terms)
        self._check(state, report)
        opt = state.optimizers["g1"]
        opt.zero_grad()
        terms["l_g1"].backward()
        opt.step()

    def _iteration_stage2(self, state: TrainState, batch: Batch, report: LossReport) -> None:
        self.probe.record(Stage.RESTORATION, GT_ONEHOT, batch.s_gt_onehot)
        i_r = state.g2(batch.s_gt_onehot, batch.i_d)
        report.record(l_d2=self._d2_step(state, batch, i_r))
        terms = self._g2_terms(state, batch, i_r)
        report.record(**terms)
        self._check(state, report)
        opt = state.optimizers["g2"]
        opt.zero_grad()
        terms["l_g2"].backward()
        opt.step()

    def _iteration_stage3(self, state: TrainState, batch: Batch, report: LossReport) -> None:
        s_r = state.g1(batch.s_d, batch.i_d)
        self.probe.record(Stage.JOINT, SOFT_REFINED, s_r)
        i_r = state.g2(s_r, batch.i_d)
        report.record(l_d1=self._d1_step(state, batch, s_r), l_d2=self._d2_step(state, batch, i_r))
        g1_terms = self._g1_terms(state, batch, s_r)
        g2_terms = self._g2_terms(state, batch, i_r)
        report.record(**g1_terms, **g2_terms)
        self._check(state, report)
        opt_g1, opt_g2 = state.optimizers["g1"], state.optimizers["g2"]
        opt_g1.zero_grad()
        opt_g2.zero_grad()
        # L_G2 reaches G1 through the soft S_r, so the shared graph must survive the first pass
        g1_terms["l_g1"].backward(retain_graph=True)
        g2_terms["l_g2"].backward()
        opt_g1.step()
        opt_g2.step()

    def _check(self, state: TrainState, report: LossReport) -> None:
        if not report.is_finite():
            raise NumericError(f"Non-finite loss terms: {report.values}")

    def _run_stage(self, state: TrainState, data: TrainingTensors, stage: Stage, step) -> TrainState:
        if state.stage != stage:
            raise StageOrderError(f"Cannot run stage {stage.value} while the state is at stage {state.stage.value}")
        for module in state.networks.values():
            module.train()
        end = state.stage_end(stage)
        ran = state.iteration < end
        while state.iteration < end:
            report = LossReport()
            iteration = state.iteration + 1
            try:
                step(state, self._batch(state, data), report)
            except NumericError as e:
                self._dump_diverged(state)
                raise TrainingDivergedError(iteration, report, stage.value) from e
            state.iteration = iteration
            self._record(state, stage, report)
            interval = state.config.checkpoint_interval
            if interval and state.iteration % interval == 0 and state.iteration < end:
                self._save(state, LATEST_NAME)
        state.stage = stage.next
        state.boundaries.append(state.iteration)
        if self._observability is not None:
            self._observability.log_stage_transition(stage.value, state.stage.value, state.iteration, self._run_id)
        self._save(state, LATEST_NAME)
        if ran:
            self._save(state, stage_end_name(stage))
        return state

    def train_stage1(self, state: TrainState, data: TrainingTensors) -> TrainState:
        return self._run_stage(state, data, Stage.REFINEMENT, self._iteration_stage1)

    def train_stage2(self, state: TrainState, data: TrainingTensors) -> TrainState:
        return self._run_stage(state, data, Stage.RESTORATION, self._iteration_stage2)

    def train_stage3(self, state: TrainState, data: TrainingTensors) -> TrainState:
        return self._run_stage(state, data, Stage.JOINT, self._iteration_stage3)

    def run_all(self, state: TrainState, data: TrainingTensors) -> TrainState:
        stages = {
            Stage.REFINEMENT: self.train_stage1,
            Stage.RESTORATION: self.train_stage2,
            Stage.JOINT: self.train_stage3,
        }
        while state.stage != Stage.DONE:
            state = stages[state.stage](state, data)
        return state

    # ----------------------------------------------------------------- probes

    def cooperative_gradient(self, state: TrainState, data: TrainingTensors) -> float:
        """Norm of dL_G2/dtheta_G1 on one batch, without touching any parameter or RNG stream."""
        saved = state.generator.get_state()
        try:
            batch = self._batch(state, data)
        finally:
            state.generator.set_state(saved)
        s_r = state.g1(batch.s_d, batch.i_d)
        i_r = state.g2(s_r, batch.i_d)
        l_g2 = self._g2_terms(state, batch, i_r)["l_g2"]
        params = [p for p in state.g1.parameters() if p.requires_grad]
        grads = torch.autograd.grad(l_g2, params, allow_unused=True)
        return float(sum(g.pow(2).sum() for g in grads if g is not None) ** 0.5)

    # ------------------------------------------------------------ bookkeeping

    def _record(self, state: TrainState, stage: Stage, report: LossReport) -> None:
        self.history.append((state.iteration, stage.value, report))
        if self.log is not None:
            self.log.append(state.iteration, stage.value, report)
        at_end = state.iteration == state.stage_end(stage)
        if self._observability is not None and (self._observability.should_log_iteration(state.iteration) or at_end):
            self._observability.log_iteration(stage.value, state.iteration, report.totals(), self._run_id)

    def save_initial(self, state: TrainState) -> None:
        if self.log is not None:
            self.log.start()
        self._save(state, LATEST_NAME)

    def _save(self, state: TrainState, name: str) -> None:
        if self._out_dir is None:
            return
        path, latency_ms = save_checkpoint(state, self._out_dir / name)
        if self._observability is not None:
            self._observability.log_checkpoint(str(path), state.stage.value, state.iteration, latency_ms, self._run_id)

    def _dump_diverged(self, state: TrainState) -> None:
        if self._out_dir is None:
            return
        path, _ = save_checkpoint(state, self._out_dir / DIVERGED_NAME)
        logger.error("Training diverged at iteration %d; state dumped to %s", state.iteration + 1, path)
