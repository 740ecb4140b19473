import pytest
import torch

from app.core.checkpoint import (
    DIVERGED_NAME,
    LATEST_NAME,
    init_train_state,
    load_checkpoint,
    save_checkpoint,
    stage_end_name,
    state_from_payload,
)
from app.core.dataset_builder import TrainingTensors
from app.core.errors import CheckpointError, StageOrderError, TrainingDivergedError
from app.core.losses import LossReport
from app.core.trainer import GT_ONEHOT, SOFT_REFINED, CooperativeTrainer
from app.models.training import AdversarialForm, Stage, TVVariant
from app.utils.training_log import LOG_COLUMNS, TrainingLog


def _state(config, tensors, extractor):
    return init_train_state(config, tensors.num_classes, feature_extractor_spec=extractor.spec)


def _assert_same_weights(a, b):
    for name in ("g1", "g2", "d1", "d2"):
        sa, sb = a.networks[name].state_dict(), b.networks[name].state_dict()
        assert sa.keys() == sb.keys()
        for key in sa:
            assert torch.equal(sa[key], sb[key]), f"{name}.{key}"


def test_stages_must_run_in_order(tiny_config, tiny_tensors, tiny_extractor):
    trainer = CooperativeTrainer(tiny_extractor)
    state = _state(tiny_config, tiny_tensors, tiny_extractor)
    with pytest.raises(StageOrderError):
        trainer.train_stage2(state, tiny_tensors)
    trainer.train_stage1(state, tiny_tensors)
    with pytest.raises(StageOrderError):
        trainer.train_stage1(state, tiny_tensors)
    with pytest.raises(StageOrderError):
        trainer.train_stage3(state, tiny_tensors)


def test_full_schedule_boundaries_and_log(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    trainer = CooperativeTrainer(tiny_extractor, out_dir=tmp_path)
    state = _state(tiny_config, tiny_tensors, tiny_extractor)
    trainer.save_initial(state)
    state = trainer.run_all(state, tiny_tensors)

    assert state.stage == Stage.DONE
    assert state.iteration == 9
    assert state.boundaries == [3, 6, 9]
    rows = trainer.log.rows()
    assert len(rows) == 9
    assert list(rows[0].keys()) == list(LOG_COLUMNS)
    assert [r["stage"] for r in rows] == ["1"] * 3 + ["2"] * 3 + ["3"] * 3
    assert [int(r["iteration"]) for r in rows] == list(range(1, 10))
    assert rows[0]["l_g2"] == "" and rows[0]["l_g1"] != ""
    assert rows[3]["l_g1"] == "" and rows[3]["l_g2"] != ""
    assert rows[-1]["l_g1"] != "" and rows[-1]["l_g2"] != ""
    for stage in (Stage.REFINEMENT, Stage.RESTORATION, Stage.JOINT):
        assert (tmp_path / stage_end_name(stage)).is_file()
    assert (tmp_path / LATEST_NAME).is_file()


def test_guidance_probe_sees_gt_then_refined(tiny_config, tiny_tensors, tiny_extractor):
    trainer = CooperativeTrainer(tiny_extractor)
    trainer.run_all(_state(tiny_config, tiny_tensors, tiny_extractor), tiny_tensors)
    assert trainer.probe.seen == {"2": {GT_ONEHOT}, "3": {SOFT_REFINED}}


def test_zero_iteration_stages_only_advance(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    config = tiny_config.model_copy(update={"n1": 0, "n2": 0, "n3": 0})
    trainer = CooperativeTrainer(tiny_extractor, out_dir=tmp_path)
    state = _state(config, tiny_tensors, tiny_extractor)
    before = {k: v.clone() for k, v in state.g1.state_dict().items()}
    state = trainer.run_all(state, tiny_tensors)
    assert state.stage == Stage.DONE
    assert state.boundaries == [0, 0, 0]
    assert trainer.history == []
    assert all(torch.equal(before[k], v) for k, v in state.g1.state_dict().items())
    assert not list(tmp_path.glob("stage*_end.pt"))


def test_cooperative_gradient_reaches_g1(tiny_config, tiny_tensors, tiny_extractor):
    trainer = CooperativeTrainer(tiny_extractor)
    state = _state(tiny_config, tiny_tensors, tiny_extractor)
    rng_before = state.generator.get_state()
    assert trainer.cooperative_gradient(state, tiny_tensors) > 0
    assert torch.equal(state.generator.get_state(), rng_before)


def test_training_is_deterministic(tiny_config, tiny_tensors, tiny_extractor):
    a = CooperativeTrainer(tiny_extractor).run_all(_state(tiny_config, tiny_tensors, tiny_extractor), tiny_tensors)
    b = CooperativeTrainer(tiny_extractor).run_all(_state(tiny_config, tiny_tensors, tiny_extractor), tiny_tensors)
    _assert_same_weights(a, b)


def test_resume_matches_uninterrupted_run(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    full = CooperativeTrainer(tiny_extractor, out_dir=tmp_path / "full")
    state = _state(tiny_config, tiny_tensors, tiny_extractor)
    full.save_initial(state)
    reference = full.run_all(state, tiny_tensors)

    resumed = state_from_payload(load_checkpoint(tmp_path / "full" / stage_end_name(Stage.REFINEMENT)))
    assert resumed.stage == Stage.RESTORATION
    assert resumed.iteration == tiny_config.n1
    resumed = CooperativeTrainer(tiny_extractor).run_all(resumed, tiny_tensors)
    assert resumed.boundaries == reference.boundaries
    _assert_same_weights(reference, resumed)


def test_checkpoint_round_trip(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    state = CooperativeTrainer(tiny_extractor).train_stage1(
        _state(tiny_config, tiny_tensors, tiny_extractor), tiny_tensors
    )
    path, latency_ms = save_checkpoint(state, tmp_path / "a.pt")
    assert latency_ms >= 0
    restored = state_from_payload(load_checkpoint(path))
    assert restored.stage == state.stage
    assert restored.iteration == state.iteration
    assert restored.boundaries == state.boundaries
    assert restored.config == state.config
    assert restored.feature_extractor_spec == tiny_extractor.spec
    assert torch.equal(restored.generator.get_state(), state.generator.get_state())
    _assert_same_weights(state, restored)

    save_checkpoint(restored, tmp_path / "b.pt")
    again = state_from_payload(load_checkpoint(tmp_path / "b.pt"))
    _assert_same_weights(restored, again)


def test_checkpoint_rewrite_is_byte_identical(tmp_path, tiny_config, tiny_tensors, tiny_extractor, untrained_segmenter):
    state = init_train_state(
        tiny_config, tiny_tensors.num_classes, segmenter=untrained_segmenter, feature_extractor_spec=tiny_extractor.spec
    )
    state = CooperativeTrainer(tiny_extractor).run_all(state, tiny_tensors)
    first, _ = save_checkpoint(state, tmp_path / "a" / LATEST_NAME)
    second, _ = save_checkpoint(state_from_payload(load_checkpoint(first)), tmp_path / "b" / LATEST_NAME)
    assert first.read_bytes() == second.read_bytes()


def test_load_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.pt")
    bogus = tmp_path / "bogus.pt"
    torch.save({"format_version": 99}, bogus)
    with pytest.raises(CheckpointError):
        load_checkpoint(bogus)
    with pytest.raises(CheckpointError):
        state_from_payload({"format_version": 1})


def test_nan_input_diverges_with_dump(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    poisoned = TrainingTensors(
        degraded=torch.full_like(tiny_tensors.degraded, float("nan")),
        degraded_seg=tiny_tensors.degraded_seg,
        gt_image=tiny_tensors.gt_image,
        gt_seg=tiny_tensors.gt_seg,
        num_classes=tiny_tensors.num_classes,
    )
    trainer = CooperativeTrainer(tiny_extractor, out_dir=tmp_path)
    state = _state(tiny_config, tiny_tensors, tiny_extractor)
    with pytest.raises(TrainingDivergedError) as info:
        trainer.train_stage1(state, poisoned)
    assert info.value.iteration == 1
    assert info.value.stage == Stage.REFINEMENT.value
    assert (tmp_path / DIVERGED_NAME).is_file()


def test_feature_extractor_stays_frozen(tiny_config, tiny_tensors, tiny_extractor):
    before = tiny_extractor.checksum()
    CooperativeTrainer(tiny_extractor).run_all(_state(tiny_config, tiny_tensors, tiny_extractor), tiny_tensors)
    assert tiny_extractor.checksum() == before


@pytest.mark.parametrize("tv_variant", list(TVVariant))
@pytest.mark.parametrize("form", list(AdversarialForm))
def test_loss_variants_train(tv_variant, form, tiny_config, tiny_tensors, tiny_extractor):
    config = tiny_config.model_copy(update={"n1": 1, "n2": 1, "n3": 1, "tv_variant": tv_variant, "adversarial_form": form})
    trainer = CooperativeTrainer(tiny_extractor)
    state = trainer.run_all(_state(config, tiny_tensors, tiny_extractor), tiny_tensors)
    assert state.iteration == 3
    assert all(report.is_finite() for _, _, report in trainer.history)


def test_interval_checkpoints(tmp_path, tiny_config, tiny_tensors, tiny_extractor):
    config = tiny_config.model_copy(update={"checkpoint_interval": 2})
    trainer = CooperativeTrainer(tiny_extractor, out_dir=tmp_path)
    state = _state(config, tiny_tensors, tiny_extractor)
    trainer.train_stage1(state, tiny_tensors)
    latest = load_checkpoint(tmp_path / LATEST_NAME)
    assert latest["iteration"] == 3
    assert latest["stage"] == Stage.RESTORATION.value


def test_training_log_truncate(tmp_path):
    log = TrainingLog(tmp_path / "log.csv")
    log.start()
    for i in range(1, 6):
        log.append(i, "1", LossReport().record(l_g1=float(i)))
    assert log.truncate(3) == 2
    assert [int(r["iteration"]) for r in log.rows()] == [1, 2, 3]
