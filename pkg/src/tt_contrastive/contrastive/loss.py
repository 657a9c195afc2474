"""
NT-Xent contrastive loss.

Rows 2k and 2k+1 of the latent batch are the two views of image k. For every
row i with partner j the directed loss is

    -log( exp(sim(z_i, z_j)/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau) )

and the batch loss is the mean over all 2N directed pairs. The positive pair
is part of the denominator; only k == i is excluded.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ShapeMismatchError
from ..tensor import Tensor, apply_op, get_default_dtype

logger = logging.getLogger(__name__)

# mean over all 2N directed pairs
LOSS_NORMALIZATION = "2N"


def cosine_sim(u, v) -> float:
    """
    Cosine similarity uᵀv / (‖u‖·‖v‖).

    Raises:
        DomainError: either vector has zero norm
    """
    a = np.asarray(u.data if isinstance(u, Tensor) else u, dtype=np.float64).reshape(-1)
    b = np.asarray(v.data if isinstance(v, Tensor) else v, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cosine_sim: lengths {a.size} and {b.size} differ")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise DomainError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))


@dataclass
class ContrastiveBatch:
    """2N latent vectors, views 2k and 2k+1 forming the positive pair of image k."""

    z: Tensor
    tau: float = 0.5

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError(f"temperature must be positive, got {self.tau}")
        if self.z.ndim != 2:
            raise ShapeMismatchError(f"latent batch must be (2N, dim), got {self.z.shape}")
        if self.z.shape[0] % 2:
            raise ShapeMismatchError(f"latent batch needs an even row count, got {self.z.shape[0]}")

    @property
    def num_images(self) -> int:
        return self.z.shape[0] // 2


def positive_index(rows: int) -> np.ndarray:
    """Partner row of every row: 0<->1, 2<->3, ..."""
    return np.arange(rows) ^ 1


def nt_xent(batch: ContrastiveBatch) -> Tensor:
    """
    Differentiable NT-Xent loss of a contrastive batch.

    Similarities are computed in float64 on l2-normalized rows and stabilized by
    subtracting the row maximum before exponentiation.
    """
    z = batch.z.data.astype(np.float64)
    tau = float(batch.tau)
    rows = z.shape[0]
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DomainError("nt_xent is undefined for a zero latent vector")
    u = z / norms
    logits = (u @ u.T) / tau
    np.fill_diagonal(logits, -np.inf)

    partner = positive_index(rows)
    idx = np.arange(rows)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = logits - row_max - np.log(denom)
    loss = -log_prob[idx, partner].mean()
    dtype = get_default_dtype()

    def _backward(g: np.ndarray):
        weights = exp / denom
        weights[idx, partner] -= 1.0
        weights *= float(g) / rows
        d_u = (weights + weights.T) @ u / tau
        d_z = (d_u - u * np.sum(u * d_u, axis=1, keepdims=True)) / norms
        return (d_z.astype(dtype),)

    return apply_op("nt_xent", np.asarray(loss, dtype=dtype), (batch.z,), _backward,
                    {"tau": tau})
