"""Finite-difference gradient oracle."""

from typing import Callable

import numpy as np

from .core import Tensor


def finite_diff_grad(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-3) -> Tensor:
    """
    Central-difference gradient of a tensor-to-scalar function.

    Each element i is estimated as (f(x + h·e_i) - f(x - h·e_i)) / 2h. ``f`` is
    called on fresh leaf tensors, so ``x`` and its gradient are left untouched.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    base = x.data.astype(np.float64)
    grad = np.zeros(base.size, dtype=np.float64)
    flat = base.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = float(f(Tensor(base.reshape(x.shape))).data)
        flat[i] = original - h
        minus = float(f(Tensor(base.reshape(x.shape))).data)
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * h)
    return Tensor(grad.reshape(x.shape))


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """
    Largest elementwise relative error between two gradients.

    Elements where both magnitudes are below ``floor`` are compared in absolute
    terms against ``floor``, so near-zero gradients do not inflate the ratio.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    err = np.abs(a - n) / scale
    return float(err.max()) if err.size else 0.0
