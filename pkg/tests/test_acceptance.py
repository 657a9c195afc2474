"""
End-to-end pretrain/finetune experiment on the synthetic dataset.

Eleven classes of twenty 64x64 images; five contrastive epochs with the
encoder frozen for two, then ten supervised epochs. Run with --runslow.
"""

import pytest

from src.tt_contrastive.config import AugmentConfig, ModelConfig, TrainConfig
from src.tt_contrastive.dataset import NUM_CLASSES, gen_synthetic, load_dataset, split_80_20
from src.tt_contrastive.pipeline import build_model, finetune, pretrain, snip_and_attach

VIEW_SIZE = (32, 32)


@pytest.fixture(scope="module")
def desk_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk") / "ccsn"
    gen_synthetic(root, num_per_class=20, size=64, seed=0)
    return load_dataset(root, image_size=64)


@pytest.mark.slow
@pytest.mark.parametrize("tensorized", [False, True], ids=["general", "tensorized"])
def test_pretrain_then_finetune(desk_dataset, tensorized):
    model_cfg = ModelConfig(tensorized=tensorized, bond=8, in_split=(8, 8), out_split=(64, 64))
    train_cfg = TrainConfig(lr0=1e-3, batch_size=32, epochs=5, freeze_epochs=2, finetune_epochs=10)
    augment_cfg = AugmentConfig(output_size=VIEW_SIZE)
    train, validation = split_80_20(desk_dataset, seed=0)

    model = build_model(model_cfg, seed=0)
    pretrained = pretrain(model, train, train_cfg, augment_cfg)
    assert len(pretrained.losses) == 5
    assert pretrained.losses[-1] <= 0.9 * pretrained.losses[0]

    model = snip_and_attach(model, train_cfg.classifier, seed=0)
    result = finetune(model, train, train_cfg, validation, input_size=VIEW_SIZE)
    assert result.train_top1[-1] >= 0.80
    assert result.val_top1[-1] > 2 / NUM_CLASSES
