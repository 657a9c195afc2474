"""Pixel-level helpers shared by dataset ingestion and augmentation."""

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """
    Bilinear resize of an (H, W, C) array with half-pixel centres.

    Source coordinates are clamped to the image, so upscaling a 1x1 image gives
    a constant image. Equal sizes return an exact copy.
    """
    image = np.asarray(image)
    in_h, in_w = image.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return image.copy()
    src = image.astype(np.float64)

    def _coords(n_out: int, n_in: int):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = _coords(out_h, in_h)
    x0, x1, fx = _coords(out_w, in_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return out.astype(image.dtype if np.issubdtype(image.dtype, np.floating) else np.float32)


def luma(image: np.ndarray) -> np.ndarray:
    """Per-pixel luma of an (H, W, 3) array, shape (H, W, 1)."""
    return (np.asarray(image, dtype=np.float64) @ LUMA_WEIGHTS)[..., None]
