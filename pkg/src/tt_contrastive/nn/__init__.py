"""Layers, encoder, losses and the checkpoint container."""

from .checkpoint import FORMAT_VERSION, MAGIC, read_container, write_container
from .encoder import (
    ConvLayer,
    DenseStage,
    Encoder,
    EncoderConfig,
    avg_pool2,
    encoder_forward,
    encoder_init,
    global_avg_pool,
)
from .layers import (
    DenseLayer,
    TTDenseLayer,
    TTDenseSpec,
    add_bias,
    dense_forward,
    dense_init,
    materialized_dense,
    tt_forward,
    tt_init,
    tt_materialize,
)
from .losses import log_softmax, softmax_cross_entropy

__all__ = [
    'DenseLayer', 'TTDenseSpec', 'TTDenseLayer', 'dense_init', 'dense_forward', 'add_bias',
    'tt_init', 'tt_forward', 'tt_materialize', 'materialized_dense',
    'EncoderConfig', 'ConvLayer', 'DenseStage', 'Encoder', 'encoder_init', 'encoder_forward',
    'avg_pool2', 'global_avg_pool',
    'softmax_cross_entropy', 'log_softmax',
    'write_container', 'read_container', 'MAGIC', 'FORMAT_VERSION',
]
