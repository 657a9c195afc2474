"""
Seeded stochastic augmentations for contrastive views.

Each view is produced in a fixed order: random area-scale crop, bilinear
resize, optional horizontal flip, brightness, contrast, saturation, clamp to
[0, 1]. Every random quantity is drawn from the supplied generator in that
order, so a view depends only on the generator state.
"""

import logging
import math
from typing import Tuple

import numpy as np

from ..config import AugmentConfig
from ..errors import ShapeMismatchError
from ..imaging import luma, resize_bilinear
from ..tensor import Tensor

logger = logging.getLogger(__name__)

ASPECT_RANGE = (3.0 / 4.0, 4.0 / 3.0)


def image_stream(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Independent generator for one image in one epoch, whatever worker runs it."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), int(index)]))


def sample_crop(height: int, width: int, scale_range: Tuple[float, float],
                rng: np.random.Generator) -> Tuple[int, int, int, int]:
    """
    Draw a crop box (top, left, h, w) covering a random fraction of the area.

    The aspect ratio is drawn log-uniformly from [3/4, 4/3], narrowed to the
    ratios for which the box fits inside the image.
    """
    area = rng.uniform(*scale_range) * height * width
    lo = max(math.log(ASPECT_RANGE[0]), math.log(area / height ** 2))
    hi = min(math.log(ASPECT_RANGE[1]), math.log(width ** 2 / area))
    if lo > hi:
        lo = hi = min(max(math.log(width / height), math.log(area / height ** 2)),
                      math.log(width ** 2 / area))
    ratio = math.exp(rng.uniform(lo, hi))
    w = int(np.clip(round(math.sqrt(area * ratio)), 1, width))
    h = int(np.clip(round(math.sqrt(area / ratio)), 1, height))
    top = int(rng.integers(0, height - h + 1))
    left = int(rng.integers(0, width - w + 1))
    return top, left, h, w


def adjust_brightness(image: np.ndarray, delta: float) -> np.ndarray:
    """Add ``delta`` to every value."""
    return image + delta if delta != 0 else image


def adjust_contrast(image: np.ndarray, factor: float) -> np.ndarray:
    """Scale about the mean luma of the whole image."""
    if factor == 1.0:
        return image
    centre = float(luma(image).mean())
    return (image - centre) * factor + centre


def adjust_saturation(image: np.ndarray, factor: float) -> np.ndarray:
    """Blend each pixel with its own luma; factor 0 gives grayscale."""
    if factor == 1.0:
        return image
    gray = luma(image)
    return gray + (image - gray) * factor


def _jitter_factor(strength: float, rng: np.random.Generator) -> float:
    return float(rng.uniform(max(0.0, 1.0 - strength), 1.0 + strength))


def augment_array(image: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Numpy core of :func:`augment`; returns a float32 (outH, outW, 3) array."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"augment expects an (H, W, 3) image, got {image.shape}")
    height, width = image.shape[:2]
    out_h, out_w = cfg.output_size

    top, left, h, w = sample_crop(height, width, cfg.crop_scale_range, rng)
    view = resize_bilinear(np.asarray(image, dtype=np.float64)[top:top + h, left:left + w], out_h, out_w)
    if rng.random() < cfg.flip_prob:
        view = view[:, ::-1]

    view = adjust_brightness(view, float(rng.uniform(-cfg.brightness, cfg.brightness)))
    view = adjust_contrast(view, _jitter_factor(cfg.contrast, rng))
    view = adjust_saturation(view, _jitter_factor(cfg.saturation, rng))
    return np.clip(view, 0.0, 1.0).astype(np.float32)


def augment(image, cfg: AugmentConfig, rng: np.random.Generator) -> Tensor:
    """
    One random view of an (H, W, 3) image with values in [0, 1].

    Identical generator states produce bitwise-identical views.
    """
    array = image.data if isinstance(image, Tensor) else np.asarray(image)
    return Tensor(augment_array(array, cfg, rng))


def augment_pair(image: np.ndarray, cfg: AugmentConfig, epoch: int, index: int) -> np.ndarray:
    """Both views of one image, drawn from its own stream; shape (2, outH, outW, 3)."""
    rng = image_stream(cfg.seed, epoch, index)
    return np.stack([augment_array(image, cfg, rng), augment_array(image, cfg, rng)])
