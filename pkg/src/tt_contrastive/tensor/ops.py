"""
Differentiable tensor operations.

The set is deliberately small: contraction over paired axes, a handful of
elementwise kinds, three reductions and the movement ops the models need.
There is no implicit broadcasting beyond tensor-with-scalar; alignment is done
explicitly with ``reshape`` or with ``expand`` (an outer product with ones).
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import (
    DomainError,
    EmptyTensorError,
    RankOverflowError,
    ShapeMismatchError,
)
from .core import Tensor, apply_op, get_default_dtype
from .runtime import get_accumulate_dtype, record_multiply_adds, tensordot

logger = logging.getLogger(__name__)

MAX_RANK = 8

Scalar = Union[int, float]
ELEMENTWISE_KINDS = ("add", "sub", "mul", "relu", "exp", "log", "scale", "clamp")
REDUCE_KINDS = ("sum", "mean", "max")


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# ---------------------------------------------------------------------------
# Contraction
# ---------------------------------------------------------------------------

def contract(x: Tensor, y: Tensor, axes: Sequence[Tuple[int, int]]) -> Tensor:
    """
    Sum of elementwise products over paired axes.

    The output shape is the free axes of ``x`` followed by the free axes of
    ``y``. An empty ``axes`` list gives the outer product.

    Raises:
        ShapeMismatchError: a paired extent differs or an axis is out of range
        RankOverflowError: the output rank exceeds ``MAX_RANK``
    """
    pairs = [(int(i), int(j)) for i, j in axes]
    for i, j in pairs:
        if not (0 <= i < x.ndim) or not (0 <= j < y.ndim):
            raise ShapeMismatchError(
                f"axis pair ({i}, {j}) out of range for ranks {x.ndim} and {y.ndim}",
                axis_pair=(i, j),
            )
        if x.shape[i] != y.shape[j]:
            raise ShapeMismatchError(
                f"axis pair ({i}, {j}): extent {x.shape[i]} != {y.shape[j]}",
                axis_pair=(i, j),
            )
    x_axes = [i for i, _ in pairs]
    y_axes = [j for _, j in pairs]
    if len(set(x_axes)) != len(x_axes) or len(set(y_axes)) != len(y_axes):
        raise ShapeMismatchError(f"axis repeated in contraction pairs {pairs}")

    x_free = [k for k in range(x.ndim) if k not in x_axes]
    y_free = [k for k in range(y.ndim) if k not in y_axes]
    out_rank = len(x_free) + len(y_free)
    if out_rank > MAX_RANK:
        raise RankOverflowError(out_rank, MAX_RANK)

    dtype = get_default_dtype()
    out = tensordot(x.data, y.data, x_axes, y_axes, out_dtype=dtype)
    contracted = int(np.prod([x.shape[i] for i in x_axes], dtype=np.int64))
    if pairs:
        record_multiply_adds(int(out.size) * contracted)

    pair_of_x = dict(pairs)
    pair_of_y = {j: i for i, j in pairs}
    n_xf = len(x_free)

    def _backward(g: np.ndarray):
        gx = gy = None
        if x.requires_grad:
            raw = tensordot(g, y.data, list(range(n_xf, out_rank)), y_free, out_dtype=dtype)
            order = x_free + [pair_of_y[j] for j in sorted(y_axes)]
            gx = np.transpose(raw, np.argsort(order)) if raw.ndim else raw
        if y.requires_grad:
            raw = tensordot(x.data, g, x_free, list(range(n_xf)), out_dtype=dtype)
            order = [pair_of_x[i] for i in sorted(x_axes)] + y_free
            gy = np.transpose(raw, np.argsort(order)) if raw.ndim else raw
        return gx, gy

    return apply_op("contract", out, (x, y), _backward, {"axes": pairs})


def expand(x: Tensor, leading: Sequence[int]) -> Tensor:
    """Repeat ``x`` over new leading axes, as an outer product with ones."""
    ones = Tensor(np.ones(tuple(leading)))
    return contract(ones, x, [])


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------

def elementwise(kind: str, x: Tensor, y: Optional[Union[Tensor, Scalar]] = None, *,
                factor: Optional[float] = None, lo: Optional[float] = None,
                hi: Optional[float] = None) -> Tensor:
    """
    Apply an elementwise kind.

    Binary kinds (add, sub, mul) take a second operand of identical shape or a
    scalar (Python number or rank-0 tensor). ``scale`` multiplies by a constant
    ``factor``; ``clamp`` limits to ``[lo, hi]``.
    """
    if kind not in ELEMENTWISE_KINDS:
        raise ValueError(f"unknown elementwise kind: {kind}")
    dtype = get_default_dtype()

    if kind in ("add", "sub", "mul"):
        if y is None:
            raise ShapeMismatchError(f"{kind} needs two operands")
        other = as_tensor(y)
        scalar = other.ndim == 0 and x.ndim != 0
        if other.shape != x.shape and not scalar:
            raise ShapeMismatchError(f"{kind}: shapes {x.shape} and {other.shape} differ")
        a, b = x.data, other.data
        if kind == "add":
            out = a + b
        elif kind == "sub":
            out = a - b
        else:
            out = a * b

        def _binary_backward(g: np.ndarray):
            if kind == "add":
                ga, gb = g, g
            elif kind == "sub":
                ga, gb = g, -g
            else:
                ga, gb = g * b, g * a
            if scalar:
                gb = np.asarray(np.sum(gb, dtype=get_accumulate_dtype()), dtype=dtype)
            return ga, gb

        return apply_op(kind, np.asarray(out, dtype=dtype), (x, other), _binary_backward)

    a = x.data
    if kind == "relu":
        mask = a > 0
        return apply_op("relu", np.where(mask, a, 0).astype(dtype), (x,),
                        lambda g: (g * mask,))
    if kind == "exp":
        out = np.exp(a).astype(dtype)
        return apply_op("exp", out, (x,), lambda g: (g * out,))
    if kind == "log":
        if np.any(a <= 0):
            raise DomainError("log requires strictly positive inputs")
        return apply_op("log", np.log(a).astype(dtype), (x,), lambda g: (g / a,))
    if kind == "scale":
        if factor is None:
            raise ValueError("scale needs a factor")
        f = float(factor)
        return apply_op("scale", (a * f).astype(dtype), (x,), lambda g: (g * f,))

    # clamp
    low = -np.inf if lo is None else lo
    high = np.inf if hi is None else hi
    inside = (a >= low) & (a <= high)
    return apply_op("clamp", np.clip(a, low, high).astype(dtype), (x,),
                    lambda g: (g * inside,))


def add(x: Tensor, y) -> Tensor:
    return elementwise("add", x, y)


def sub(x: Tensor, y) -> Tensor:
    return elementwise("sub", x, y)


def mul(x: Tensor, y) -> Tensor:
    return elementwise("mul", x, y)


def relu(x: Tensor) -> Tensor:
    return elementwise("relu", x)


def exp(x: Tensor) -> Tensor:
    return elementwise("exp", x)


def log(x: Tensor) -> Tensor:
    return elementwise("log", x)


def scale(x: Tensor, factor: float) -> Tensor:
    return elementwise("scale", x, factor=factor)


def clamp(x: Tensor, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    return elementwise("clamp", x, lo=lo, hi=hi)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------

def reduce(kind: str, x: Tensor, axis: Optional[int] = None) -> Tensor:
    """
    Reduce over one axis, or over everything when ``axis`` is None.

    ``max`` routes the gradient to the first maximal element.
    """
    if kind not in REDUCE_KINDS:
        raise ValueError(f"unknown reduce kind: {kind}")
    if x.size == 0:
        raise EmptyTensorError("cannot reduce an empty tensor")
    if axis is not None and not (0 <= axis < x.ndim):
        raise ShapeMismatchError(f"reduce axis {axis} out of range for rank {x.ndim}")

    dtype = get_default_dtype()
    acc = get_accumulate_dtype()
    a = x.data
    shape = x.shape

    if kind in ("sum", "mean"):
        count = a.size if axis is None else shape[axis]
        out = np.sum(a, axis=axis, dtype=acc)
        if kind == "mean":
            out = out / count
        factor = 1.0 if kind == "sum" else 1.0 / count

        def _sum_backward(g: np.ndarray):
            if axis is None:
                return (np.full(shape, g * factor, dtype=dtype),)
            return (np.broadcast_to(np.expand_dims(g, axis) * factor, shape).astype(dtype),)

        return apply_op(kind, np.asarray(out, dtype=dtype), (x,), _sum_backward)

    if axis is None:
        flat_index = int(np.argmax(a))
        out = a.reshape(-1)[flat_index]

        def _max_backward(g: np.ndarray):
            grad = np.zeros(a.size, dtype=dtype)
            grad[flat_index] = g
            return (grad.reshape(shape),)

        return apply_op("max", np.asarray(out, dtype=dtype), (x,), _max_backward)

    index = np.expand_dims(np.argmax(a, axis=axis), axis)
    out = np.take_along_axis(a, index, axis=axis).squeeze(axis)

    def _max_axis_backward(g: np.ndarray):
        grad = np.zeros(shape, dtype=dtype)
        np.put_along_axis(grad, index, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return apply_op("max", np.asarray(out, dtype=dtype), (x,), _max_axis_backward)


def sum_(x: Tensor, axis: Optional[int] = None) -> Tensor:
    return reduce("sum", x, axis)


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    return reduce("mean", x, axis)


def max_(x: Tensor, axis: Optional[int] = None) -> Tensor:
    return reduce("max", x, axis)


# ---------------------------------------------------------------------------
# Movement
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Reinterpret the shape; data order is never changed."""
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeMismatchError(f"cannot reshape {x.shape} into {shape}")
    original = x.shape
    return apply_op("reshape", x.data.reshape(shape), (x,),
                    lambda g: (g.reshape(original),))


def transpose(x: Tensor, perm: Sequence[int]) -> Tensor:
    """Permute axes."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(x.ndim)):
        raise ShapeMismatchError(f"invalid permutation {perm} for rank {x.ndim}")
    inverse = np.argsort(perm)
    return apply_op("transpose", np.ascontiguousarray(np.transpose(x.data, perm)), (x,),
                    lambda g: (np.ascontiguousarray(np.transpose(g, inverse)),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Concatenate along ``axis``; all other extents must agree."""
    tensors = list(tensors)
    if not tensors:
        raise EmptyTensorError("concat needs at least one tensor")
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            t.shape[k] != reference[k] for k in range(len(reference)) if k != axis
        ):
            raise ShapeMismatchError(f"concat: shape {t.shape} incompatible with {reference}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def _backward(g: np.ndarray):
        grads: List[np.ndarray] = []
        for k in range(len(tensors)):
            index = [slice(None)] * g.ndim
            index[axis] = slice(bounds[k], bounds[k + 1])
            grads.append(np.ascontiguousarray(g[tuple(index)]))
        return grads

    out = np.concatenate([t.data for t in tensors], axis=axis)
    return apply_op("concat", out, tensors, _backward)


def extract_patches(x: Tensor, kernel: int) -> Tensor:
    """
    Gather zero-padded ``kernel``×``kernel`` neighbourhoods of an NHWC tensor.

    Output shape is (B, H, W, k, k, C), so a 'same' convolution is a contraction
    of the patches with a (k, k, C_in, C_out) kernel.
    """
    if x.ndim != 4:
        raise ShapeMismatchError(f"extract_patches expects (B, H, W, C), got {x.shape}")
    if kernel < 1 or kernel % 2 == 0:
        raise ShapeMismatchError(f"kernel size must be odd, got {kernel}")
    batch, height, width, channels = x.shape
    pad = kernel // 2
    padded = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel), axis=(1, 2))
    patches = np.ascontiguousarray(np.transpose(windows, (0, 1, 2, 4, 5, 3)))

    def _backward(g: np.ndarray):
        grad = np.zeros_like(padded)
        for di in range(kernel):
            for dj in range(kernel):
                grad[:, di:di + height, dj:dj + width, :] += g[:, :, :, di, dj, :]
        return (grad[:, pad:pad + height, pad:pad + width, :],)

    return apply_op("patches", patches, (x,), _backward, {"kernel": kernel})
