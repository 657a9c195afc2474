"""Tests for the composite model, the optimizer and both training phases."""

import struct
from dataclasses import replace

import numpy as np
import pytest

from src.tt_contrastive.config import ModelConfig, TrainConfig
from src.tt_contrastive.dataset import Dataset
from src.tt_contrastive.errors import (
    CheckpointFormatError,
    ConfigError,
    DatasetEmptyError,
    HeadAlreadySnippedError,
    IndivisibleSplitError,
    LabelOutOfRangeError,
    MissingClassifierError,
)
from src.tt_contrastive.monitoring import RunRecorder
from src.tt_contrastive.nn import FORMAT_VERSION, MAGIC, read_container, write_container
from src.tt_contrastive.pipeline import (
    AdamState,
    adam_step,
    batches,
    build_model,
    evaluate_top1,
    finetune,
    load_model,
    lr_at,
    make_views,
    predict,
    prepare_inputs,
    pretrain,
    save_model,
    snip_and_attach,
)
from src.tt_contrastive.tensor import Tensor


@pytest.fixture
def tiny_train_config():
    return TrainConfig(lr0=1e-3, epochs=2, freeze_epochs=1, finetune_epochs=2, batch_size=4)


def snapshot(params):
    return {name: tensor.data.copy() for name, tensor in params}


def assert_same_parameters(first, second):
    assert [name for name, _ in first] == [name for name, _ in second]
    for (name, a), (_, b) in zip(first, second):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)


class TestBuildModel:
    """Model construction and the TT switch."""

    def test_dense_first_layer(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        assert not model.tensorized
        assert model.projection[0].param_count() == 8 * 16 + 16
        assert [layer.out_dim for layer in model.projection] == [16, 8, 4]

    def test_tensorized_first_layer(self, tiny_model_config):
        model = build_model(replace(tiny_model_config, tensorized=True), seed=0)
        assert model.tensorized
        assert model.projection[0].param_count() == 2 * 4 * 2 + 4 * 4 * 2 + 16

    def test_indivisible_split(self, tiny_model_config):
        with pytest.raises(IndivisibleSplitError):
            build_model(replace(tiny_model_config, tensorized=True, in_split=(3, 3)), seed=0)

    def test_same_seed_same_parameters(self, tiny_model_config):
        assert_same_parameters(build_model(tiny_model_config, 3).parameters(),
                               build_model(tiny_model_config, 3).parameters())

    def test_projection_output_shape(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        z = model.project(model.encode(Tensor(np.ones((2, 8, 8, 3)))))
        assert z.shape == (2, 4)

    def test_classify_needs_classifier(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        with pytest.raises(MissingClassifierError):
            model.classify(Tensor(np.ones((1, 8, 8, 3))))


class TestSnip:
    """Cutting the projection head and attaching a classifier."""

    def test_default_model_removes_last_two_layers(self):
        model = build_model(ModelConfig(), seed=0)
        snipped = snip_and_attach(model, "single-layer")
        classifier_params = sum(layer.param_count() for layer in snipped.classifier)
        removed = model.param_count() - (snipped.param_count() - classifier_params)
        assert removed == 4096 * 1024 + 1024 + 1024 * 512 + 512
        assert classifier_params == 4096 * 11 + 11

    def test_surviving_layers_are_shared(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        before = snapshot(model.parameters()[:-4])
        snipped = snip_and_attach(model)
        assert snipped.projection[0] is model.projection[0]
        assert snipped.encoder is model.encoder
        for name, tensor in snipped.parameters():
            if name in before:
                np.testing.assert_array_equal(tensor.data, before[name])

    def test_two_layer_classifier(self, tiny_model_config):
        snipped = snip_and_attach(build_model(tiny_model_config, seed=0), "two-layer")
        assert [(layer.in_dim, layer.out_dim) for layer in snipped.classifier] == [(16, 16), (16, 11)]
        assert snipped.classify(Tensor(np.ones((3, 8, 8, 3)))).shape == (3, 11)

    def test_cannot_snip_twice(self, tiny_model_config):
        snipped = snip_and_attach(build_model(tiny_model_config, seed=0))
        with pytest.raises(HeadAlreadySnippedError):
            snip_and_attach(snipped)

    def test_unknown_variant(self, tiny_model_config):
        with pytest.raises(ConfigError):
            snip_and_attach(build_model(tiny_model_config, seed=0), "three-layer")


class TestSchedule:
    """Continuous exponential decay."""

    def test_one_decay_period(self):
        assert lr_at(TrainConfig(), 80000) == pytest.approx(0.0192)

    def test_half_period_is_not_staircased(self):
        assert lr_at(TrainConfig(), 40000) == pytest.approx(0.019595918, rel=1e-8)

    def test_step_zero_and_override(self):
        assert lr_at(TrainConfig(), 0) == 0.02
        assert lr_at(TrainConfig(), 0, lr0=0.5) == 0.5

    def test_negative_step(self):
        with pytest.raises(ValueError):
            lr_at(TrainConfig(), -1)


class TestAdam:
    """Bias-corrected ADAM updates."""

    def test_first_step_moves_by_lr(self):
        param = Tensor([1.0])
        state = AdamState()
        adam_step(state, [("p", param)], [np.array([0.5])], lr=0.1)
        assert param.item() == pytest.approx(0.9, abs=1e-6)

    def test_missing_gradient_is_skipped(self):
        a, b = Tensor([1.0]), Tensor([1.0])
        state = AdamState()
        adam_step(state, [("a", a), ("b", b)], [np.array([1.0]), None], lr=0.1)
        assert b.item() == 1.0
        assert "b" not in state.first
        assert state.steps == {"a": 1}

    def test_zero_lr_updates_moments_only(self):
        param = Tensor([2.0])
        state = AdamState()
        adam_step(state, [("p", param)], [np.array([1.0])], lr=0.0)
        assert param.item() == 2.0
        assert state.first["p"][0] == pytest.approx(0.1)

    def test_late_parameter_gets_its_own_bias_correction(self):
        early, late = Tensor([1.0]), Tensor([1.0])
        state = AdamState()
        for _ in range(3):
            adam_step(state, [("early", early)], [np.array([0.5])], lr=0.1)
        adam_step(state, [("early", early), ("late", late)], [np.array([0.5]), np.array([0.5])], lr=0.1)
        assert state.steps == {"early": 4, "late": 1}
        assert late.item() == pytest.approx(0.9, abs=1e-6)

    def test_gradient_shape_mismatch(self):
        from src.tt_contrastive.errors import ShapeMismatchError
        with pytest.raises(ShapeMismatchError):
            adam_step(AdamState(), [("p", Tensor([1.0, 2.0]))], [np.array([1.0])], lr=0.1)


class TestBatchesAndViews:

    def test_batches_cover_every_index_once(self):
        parts = batches(10, 4, seed=0, epoch=0)
        assert [len(p) for p in parts] == [4, 4, 2]
        assert sorted(np.concatenate(parts).tolist()) == list(range(10))

    def test_batches_depend_on_epoch(self):
        first = np.concatenate(batches(20, 20, seed=0, epoch=0))
        second = np.concatenate(batches(20, 20, seed=0, epoch=1))
        assert not np.array_equal(first, second)

    def test_views_do_not_depend_on_workers(self, tiny_dataset, tiny_augment_config):
        images = tiny_dataset.images()
        serial = make_views(images, [0, 3, 5], tiny_augment_config, epoch=2, workers=1)
        threaded = make_views(images, [0, 3, 5], tiny_augment_config, epoch=2, workers=3)
        assert serial.shape == (6, 8, 8, 3)
        np.testing.assert_array_equal(serial, threaded)

    def test_prepare_inputs_resizes(self, tiny_dataset):
        assert prepare_inputs(tiny_dataset).shape == (6, 16, 16, 3)
        assert prepare_inputs(tiny_dataset, (8, 8)).shape == (6, 8, 8, 3)


class TestPretrain:
    """Contrastive phase."""

    def test_frozen_encoder_is_bitwise_preserved(self, tiny_model_config, tiny_dataset,
                                                 tiny_augment_config):
        model = build_model(tiny_model_config, seed=0)
        encoder_before = snapshot(model.encoder.parameters())
        head_before = snapshot(model.projection[0].parameters())
        cfg = TrainConfig(lr0=1e-2, epochs=1, freeze_epochs=1, batch_size=4)
        result = pretrain(model, tiny_dataset, cfg, tiny_augment_config)
        for name, tensor in model.encoder.parameters():
            np.testing.assert_array_equal(tensor.data, encoder_before[name])
        changed = [not np.array_equal(t.data, head_before[n]) for n, t in model.projection[0].parameters()]
        assert any(changed)
        assert result.steps == 2
        assert len(result.losses) == 1

    def test_encoder_trains_after_unfreezing(self, tiny_model_config, tiny_dataset,
                                             tiny_augment_config, tiny_train_config):
        model = build_model(tiny_model_config, seed=0)
        encoder_before = snapshot(model.encoder.parameters())
        pretrain(model, tiny_dataset, tiny_train_config, tiny_augment_config)
        assert any(not np.array_equal(t.data, encoder_before[n]) for n, t in model.encoder.parameters())
        assert all(model.trainable_mask())

    def test_reproducible_across_runs_and_workers(self, tiny_model_config, tiny_dataset,
                                                  tiny_augment_config, tiny_train_config):
        first = build_model(tiny_model_config, seed=1)
        second = build_model(tiny_model_config, seed=1)
        a = pretrain(first, tiny_dataset, tiny_train_config, tiny_augment_config, workers=1)
        b = pretrain(second, tiny_dataset, tiny_train_config, tiny_augment_config, workers=3)
        assert a.losses == b.losses
        assert_same_parameters(first.parameters(), second.parameters())

    def test_tensorized_model_pretrains(self, tiny_model_config, tiny_dataset,
                                        tiny_augment_config, tiny_train_config):
        model = build_model(replace(tiny_model_config, tensorized=True), seed=0)
        result = pretrain(model, tiny_dataset, tiny_train_config, tiny_augment_config)
        assert all(np.isfinite(result.losses))

    def test_records_epochs(self, tmp_path, tiny_model_config, tiny_dataset,
                            tiny_augment_config, tiny_train_config):
        recorder = RunRecorder(tmp_path, "pretrain")
        pretrain(build_model(tiny_model_config, seed=0), tiny_dataset, tiny_train_config,
                 tiny_augment_config, recorder=recorder)
        epochs = recorder.phase_metrics("pretrain")
        assert [m.epoch for m in epochs] == [1, 2]
        assert [m.encoder_trainable for m in epochs] == [False, True]

    def test_empty_dataset(self, tiny_model_config, tiny_augment_config, tiny_train_config):
        with pytest.raises(DatasetEmptyError):
            pretrain(build_model(tiny_model_config, seed=0), Dataset(), tiny_train_config,
                     tiny_augment_config)

    def test_snipped_model_cannot_pretrain(self, tiny_model_config, tiny_dataset,
                                           tiny_augment_config, tiny_train_config):
        snipped = snip_and_attach(build_model(tiny_model_config, seed=0))
        with pytest.raises(HeadAlreadySnippedError):
            pretrain(snipped, tiny_dataset, tiny_train_config, tiny_augment_config)


class TestFinetune:
    """Supervised phase and evaluation."""

    def test_finetune_reports_every_epoch(self, tiny_model_config, tiny_dataset, tiny_train_config):
        model = snip_and_attach(build_model(tiny_model_config, seed=0))
        model.set_encoder_trainable(False)
        result = finetune(model, tiny_dataset, tiny_train_config, validation=tiny_dataset,
                          input_size=(8, 8))
        assert len(result.losses) == 2
        assert len(result.train_top1) == 2
        assert len(result.val_top1) == 2
        assert all(0.0 <= v <= 1.0 for v in result.train_top1)
        assert all(model.trainable_mask())

    def test_finetune_needs_classifier(self, tiny_model_config, tiny_dataset, tiny_train_config):
        with pytest.raises(MissingClassifierError):
            finetune(build_model(tiny_model_config, seed=0), tiny_dataset, tiny_train_config)

    def test_label_out_of_range(self, tiny_dataset, tiny_train_config):
        cfg = ModelConfig(stem_channels=4, stages=((1, 4),), head=(16, 8, 4), num_classes=3)
        model = snip_and_attach(build_model(cfg, seed=0))
        with pytest.raises(LabelOutOfRangeError):
            finetune(model, tiny_dataset, tiny_train_config)

    def test_predict_breaks_ties_to_lowest_index(self, tiny_model_config):
        model = snip_and_attach(build_model(tiny_model_config, seed=0), "single-layer")
        model.classifier[0].weight.data[:] = 0.0
        model.classifier[0].bias.data[:] = 0.0
        assert predict(model, np.ones((3, 8, 8, 3), dtype=np.float32)).tolist() == [0, 0, 0]

    def test_top1(self, tiny_model_config, tiny_dataset):
        model = snip_and_attach(build_model(tiny_model_config, seed=0), "single-layer")
        model.classifier[0].weight.data[:] = 0.0
        model.classifier[0].bias.data[:] = 0.0
        # always predicts class 0; one of six samples has label 0
        assert evaluate_top1(model, tiny_dataset) == pytest.approx(1 / 6)

    def test_top1_empty(self, tiny_model_config):
        model = snip_and_attach(build_model(tiny_model_config, seed=0))
        with pytest.raises(DatasetEmptyError):
            evaluate_top1(model, Dataset())


class TestCheckpoint:
    """Model save/load through the checkpoint container."""

    def test_round_trip_restores_parameters_and_flags(self, tmp_path, tiny_model_config):
        model = snip_and_attach(build_model(replace(tiny_model_config, tensorized=True), seed=4))
        model.set_encoder_trainable(False)
        path = save_model(model, tmp_path / "model.ttck")
        loaded = load_model(path)
        assert loaded.tensorized and loaded.snipped
        assert loaded.classifier_variant == "two-layer"
        assert loaded.trainable_mask() == model.trainable_mask()
        assert_same_parameters(model.parameters(), loaded.parameters())

    def test_identical_models_give_identical_bytes(self, tmp_path, tiny_model_config):
        first = save_model(build_model(tiny_model_config, seed=2), tmp_path / "a.ttck")
        second = save_model(build_model(tiny_model_config, seed=2), tmp_path / "b.ttck")
        assert first.read_bytes() == second.read_bytes()

    def test_container_header(self, tmp_path):
        path = write_container(tmp_path / "c.ttck", {"note": "x"}, [("w", np.arange(6).reshape(2, 3))])
        blob = path.read_bytes()
        assert blob[:4] == MAGIC
        assert struct.unpack_from("<I", blob, 4)[0] == FORMAT_VERSION
        manifest, arrays = read_container(path)
        assert manifest["note"] == "x"
        np.testing.assert_array_equal(arrays["w"], np.arange(6).reshape(2, 3))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ttck"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(CheckpointFormatError):
            read_container(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v2.ttck"
        path.write_bytes(struct.pack("<4sIQ", MAGIC, FORMAT_VERSION + 1, 2) + b"{}")
        with pytest.raises(CheckpointFormatError):
            read_container(path)

    def test_truncated_buffer(self, tmp_path):
        path = write_container(tmp_path / "t.ttck", {}, [("w", np.ones(8))])
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CheckpointFormatError):
            read_container(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointFormatError):
            load_model(tmp_path / "absent.ttck")

    def test_corrupt_manifest(self, tmp_path):
        path = tmp_path / "corrupt.ttck"
        path.write_bytes(struct.pack("<4sIQ", MAGIC, FORMAT_VERSION, 5) + b"{nope")
        with pytest.raises(CheckpointFormatError):
            read_container(path)

    def test_manifest_must_be_an_object(self, tmp_path):
        path = tmp_path / "list.ttck"
        path.write_bytes(struct.pack("<4sIQ", MAGIC, FORMAT_VERSION, 2) + b"[]")
        with pytest.raises(CheckpointFormatError):
            read_container(path)

    def test_tensor_shape_disagrees_with_buffer(self, tmp_path):
        manifest = b'{"tensors":[{"name":"w","nbytes":8,"offset":0,"shape":[3]}]}'
        path = tmp_path / "shape.ttck"
        path.write_bytes(struct.pack("<4sIQ", MAGIC, FORMAT_VERSION, len(manifest)) + manifest + bytes(8))
        with pytest.raises(CheckpointFormatError):
            read_container(path)
