"""Softmax cross-entropy as a single fused tape operation."""

import logging
from typing import Sequence

import numpy as np

from ..errors import LabelOutOfRangeError, ShapeMismatchError
from ..tensor import Tensor, apply_op, get_default_dtype

logger = logging.getLogger(__name__)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax in float64 with max-subtraction."""
    x = np.asarray(logits, dtype=np.float64)
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean cross-entropy of integer labels under softmax(logits).

    Args:
        logits: (batch, num_classes)
        labels: One class index per row

    Raises:
        LabelOutOfRangeError: a label is outside 0..num_classes-1
    """
    if logits.ndim != 2:
        raise ShapeMismatchError(f"logits must be (batch, classes), got {logits.shape}")
    batch, num_classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != batch:
        raise ShapeMismatchError(f"{labels.shape[0]} labels for a batch of {batch}")
    for label in labels:
        if not 0 <= label < num_classes:
            raise LabelOutOfRangeError(int(label), num_classes)

    logp = log_softmax(logits.data)
    rows = np.arange(batch)
    loss = -logp[rows, labels].mean()
    dtype = get_default_dtype()

    def _backward(g: np.ndarray):
        grad = np.exp(logp)
        grad[rows, labels] -= 1.0
        return ((grad * (float(g) / batch)).astype(dtype),)

    return apply_op("cross_entropy", np.asarray(loss, dtype=dtype), (logits,), _backward)
