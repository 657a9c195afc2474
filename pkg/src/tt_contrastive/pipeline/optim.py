"""ADAM optimizer and the continuous exponential learning-rate schedule."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainConfig
from ..errors import ShapeMismatchError
from ..tensor import Tensor

logger = logging.getLogger(__name__)


def lr_at(cfg: TrainConfig, step: int, lr0: Optional[float] = None) -> float:
    """
    Learning rate after ``step`` optimizer steps.

    lr0 * decay_rate ** (step / decay_steps), without staircase rounding.
    """
    if step < 0:
        raise ValueError("step must be non-negative")
    base = cfg.lr0 if lr0 is None else lr0
    return base * cfg.decay_rate ** (step / cfg.decay_steps)


@dataclass
class AdamState:
    """
    Moment buffers per parameter name.

    Each parameter keeps its own step count so that layers unfrozen late start
    with a correct bias correction.
    """

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> 'AdamState':
        return cls(beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)


def adam_step(state: AdamState, params: Sequence[Tuple[str, Tensor]],
              grads: Sequence[Optional[np.ndarray]], lr: float) -> None:
    """
    Apply one bias-corrected ADAM update in place.

    Parameters whose gradient is None are skipped and keep their moments.

    Raises:
        ShapeMismatchError: a gradient does not match its parameter
    """
    if len(params) != len(grads):
        raise ShapeMismatchError(f"{len(params)} parameters but {len(grads)} gradients")
    state.step += 1
    for (name, param), grad in zip(params, grads):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise ShapeMismatchError(f"gradient for {name} has shape {grad.shape}, expected {param.shape}")
        g = grad.astype(np.float32, copy=False)
        m = state.first.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        else:
            v = state.second[name]
        t = state.steps.get(name, 0) + 1
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.first[name] = m.astype(np.float32, copy=False)
        state.second[name] = v.astype(np.float32, copy=False)
        state.steps[name] = t
        if lr == 0:
            continue
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.data.dtype)
