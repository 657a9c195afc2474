"""
Dense and tensor-train-factorized dense layers.

A TT-dense layer replaces the (a·b) × (c·d) weight matrix of a dense layer by
two rank-3 cores, core1 (a, c, r) and core2 (b, d, r), joined by the bond index
r. The forward pass reshapes each input row to (a, b) and contracts it with
core1 first, then with core2.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import IndivisibleSplitError, ConfigError, ShapeMismatchError
from ..tensor import Tensor, add, contract, expand, reshape, transpose

logger = logging.getLogger(__name__)


def _glorot_scale(in_dim: int, out_dim: int) -> float:
    return math.sqrt(6.0 / (in_dim + out_dim))


@dataclass
class DenseLayer:
    """Fully connected layer y = x·W + b."""

    weight: Tensor
    bias: Tensor
    trainable: bool = True
    name: str = "dense"
    kind: str = field(default="dense", init=False)

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeMismatchError(f"dense weight must be rank 2, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[1],):
            raise ShapeMismatchError(
                f"bias shape {self.bias.shape} does not match out_dim {self.weight.shape[1]}"
            )
        self.set_trainable(self.trainable)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        self.weight.requires_grad = trainable
        self.bias.requires_grad = trainable

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def param_count(self, include_bias: bool = True) -> int:
        return self.weight.size + (self.bias.size if include_bias else 0)

    def __call__(self, x: Tensor) -> Tensor:
        return dense_forward(self, x)


def dense_init(in_dim: int, out_dim: int, seed: int, name: str = "dense") -> DenseLayer:
    """Glorot-uniform weights, zero bias; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    s = _glorot_scale(in_dim, out_dim)
    weight = rng.uniform(-s, s, size=(in_dim, out_dim)).astype(np.float32)
    return DenseLayer(Tensor(weight, name=f"{name}.weight"),
                      Tensor(np.zeros(out_dim), name=f"{name}.bias"), name=name)


def add_bias(y: Tensor, bias: Tensor) -> Tensor:
    """Add a per-feature bias along the last axis without implicit broadcasting."""
    return add(y, expand(bias, y.shape[:-1]))


def dense_forward(layer: DenseLayer, x: Tensor) -> Tensor:
    """y = x·W + bias for x of shape (batch, in_dim)."""
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeMismatchError(
            f"{layer.name}: input shape {x.shape} incompatible with in_dim {layer.in_dim}"
        )
    return add_bias(contract(x, layer.weight, [(1, 0)]), layer.bias)


@dataclass(frozen=True)
class TTDenseSpec:
    """
    Factorization plan of a TT-dense layer.

    Attributes:
        in_split: (a, b) with a·b == in_dim
        out_split: (c, d) with c·d == out_dim
        bond: bond dimension r
    """

    in_split: Tuple[int, int]
    out_split: Tuple[int, int]
    bond: int

    def __post_init__(self):
        values = (*self.in_split, *self.out_split, self.bond)
        if len(self.in_split) != 2 or len(self.out_split) != 2:
            raise ConfigError("splits must have exactly two factors")
        if any(int(v) != v or v < 1 for v in values):
            raise ConfigError(f"split factors and bond must be positive integers, got {values}")

    @property
    def in_dim(self) -> int:
        return self.in_split[0] * self.in_split[1]

    @property
    def out_dim(self) -> int:
        return self.out_split[0] * self.out_split[1]

    @property
    def core1_shape(self) -> Tuple[int, int, int]:
        return (self.in_split[0], self.out_split[0], self.bond)

    @property
    def core2_shape(self) -> Tuple[int, int, int]:
        return (self.in_split[1], self.out_split[1], self.bond)

    def validate(self, in_dim: int, out_dim: int) -> "TTDenseSpec":
        """Check the splits factor the given layer dimensions."""
        if self.in_dim != in_dim:
            raise IndivisibleSplitError(in_dim, self.in_split, "input")
        if self.out_dim != out_dim:
            raise IndivisibleSplitError(out_dim, self.out_split, "output")
        return self

    def as_tuple(self) -> Tuple[int, int, int, int, int]:
        return (*self.in_split, *self.out_split, self.bond)


@dataclass
class TTDenseLayer:
    """Dense layer whose weight is stored as two rank-3 cores."""

    spec: TTDenseSpec
    core1: Tensor
    core2: Tensor
    bias: Tensor
    trainable: bool = True
    name: str = "tt_dense"
    kind: str = field(default="tt", init=False)

    def __post_init__(self):
        if self.core1.shape != self.spec.core1_shape:
            raise ShapeMismatchError(f"core1 shape {self.core1.shape} != {self.spec.core1_shape}")
        if self.core2.shape != self.spec.core2_shape:
            raise ShapeMismatchError(f"core2 shape {self.core2.shape} != {self.spec.core2_shape}")
        if self.bias.shape != (self.spec.out_dim,):
            raise ShapeMismatchError(f"bias shape {self.bias.shape} != ({self.spec.out_dim},)")
        self.set_trainable(self.trainable)

    @property
    def in_dim(self) -> int:
        return self.spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.spec.out_dim

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        for tensor in (self.core1, self.core2, self.bias):
            tensor.requires_grad = trainable

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [(f"{self.name}.core1", self.core1), (f"{self.name}.core2", self.core2),
                (f"{self.name}.bias", self.bias)]

    def param_count(self, include_bias: bool = True) -> int:
        count = self.core1.size + self.core2.size
        return count + (self.bias.size if include_bias else 0)

    def __call__(self, x: Tensor) -> Tensor:
        return tt_forward(self, x)


def tt_init(spec: TTDenseSpec, seed: int, name: str = "tt_dense") -> TTDenseLayer:
    """
    Initialize cores i.i.d. uniform in [-s, s] with s = sqrt(6/(in+out)) / sqrt(r).

    Dividing by sqrt(r) keeps the variance of the materialized weight
    independent of the bond dimension.
    """
    rng = np.random.default_rng(seed)
    s = _glorot_scale(spec.in_dim, spec.out_dim) / math.sqrt(spec.bond)
    core1 = rng.uniform(-s, s, size=spec.core1_shape).astype(np.float32)
    core2 = rng.uniform(-s, s, size=spec.core2_shape).astype(np.float32)
    return TTDenseLayer(
        spec,
        Tensor(core1, name=f"{name}.core1"),
        Tensor(core2, name=f"{name}.core2"),
        Tensor(np.zeros(spec.out_dim), name=f"{name}.bias"),
        name=name,
    )


def tt_forward(layer: TTDenseLayer, x: Tensor) -> Tensor:
    """
    Forward pass of a TT-dense layer for x of shape (batch, a·b).

    Per sample: T[b,c,r] = Σ_a X[a,b]·core1[a,c,r], then
    Y[c,d] = Σ_{b,r} T[b,c,r]·core2[b,d,r]; Y is flattened to c·d and the bias
    is added.
    """
    a, b = layer.spec.in_split
    c, d = layer.spec.out_split
    if x.ndim != 2 or x.shape[1] != a * b:
        raise ShapeMismatchError(
            f"{layer.name}: input shape {x.shape} incompatible with in_dim {a * b}"
        )
    batch = x.shape[0]
    xs = reshape(x, (batch, a, b))
    t = contract(xs, layer.core1, [(1, 0)])              # (batch, b, c, r)
    y = contract(t, layer.core2, [(1, 0), (3, 2)])       # (batch, c, d)
    return add_bias(reshape(y, (batch, c * d)), layer.bias)


def tt_materialize(layer: TTDenseLayer) -> Tensor:
    """
    Contract the cores into the full (a·b, c·d) weight.

    W[(a,b),(c,d)] = Σ_r core1[a,c,r]·core2[b,d,r] with row index a·B + b and
    column index c·D + d. Used as a correctness oracle, never in the fast path.
    """
    a, b = layer.spec.in_split
    c, d = layer.spec.out_split
    w = contract(layer.core1, layer.core2, [(2, 2)])     # (a, c, b, d)
    return reshape(transpose(w, (0, 2, 1, 3)), (a * b, c * d))


def materialized_dense(layer: TTDenseLayer, name: Optional[str] = None) -> DenseLayer:
    """Dense layer carrying the materialized TT weight and a copy of the bias."""
    weight = tt_materialize(layer)
    return DenseLayer(Tensor(weight.data), Tensor(layer.bias.data),
                      trainable=False, name=name or f"{layer.name}.materialized")
