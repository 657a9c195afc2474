"""Two-phase contrastive training pipeline."""

from ..config import TrainConfig
from .model import (
    ModelGraph,
    build_model,
    derive_seed,
    encoder_config,
    load_model,
    save_model,
    snip_and_attach,
    tt_spec,
)
from .optim import AdamState, adam_step, lr_at
from .trainer import (
    FinetuneResult,
    PretrainResult,
    batches,
    contrastive_step,
    evaluate_top1,
    finetune,
    make_views,
    predict,
    prepare_inputs,
    pretrain,
    supervised_step,
)

__all__ = [
    'TrainConfig', 'ModelGraph', 'build_model', 'derive_seed', 'encoder_config', 'tt_spec',
    'snip_and_attach', 'save_model', 'load_model',
    'AdamState', 'adam_step', 'lr_at',
    'PretrainResult', 'FinetuneResult', 'batches', 'make_views', 'contrastive_step',
    'supervised_step', 'pretrain', 'finetune', 'predict', 'prepare_inputs', 'evaluate_top1',
]
