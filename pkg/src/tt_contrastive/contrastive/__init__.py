"""Contrastive views and the NT-Xent loss."""

from ..config import AugmentConfig
from .augment import (
    adjust_brightness,
    adjust_contrast,
    adjust_saturation,
    augment,
    augment_array,
    augment_pair,
    image_stream,
    sample_crop,
)
from .loss import LOSS_NORMALIZATION, ContrastiveBatch, cosine_sim, nt_xent, positive_index

__all__ = [
    'AugmentConfig', 'augment', 'augment_array', 'augment_pair', 'image_stream', 'sample_crop',
    'adjust_brightness', 'adjust_contrast', 'adjust_saturation',
    'ContrastiveBatch', 'cosine_sim', 'nt_xent', 'positive_index', 'LOSS_NORMALIZATION',
]
