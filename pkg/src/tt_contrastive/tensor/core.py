"""
Dense tensors with tape-based reverse-mode differentiation.

A ``Graph`` is an append-only tape. Every differentiable operation appends a
node holding its inputs, saved activations and a backward closure; ``backward``
walks the tape once in reverse insertion order. Tapes are rebuilt on every
forward pass and are confined to the thread that built them.
"""

import contextlib
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyTensorError, NotScalarError, NumericError, ShapeMismatchError

logger = logging.getLogger(__name__)

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def get_default_dtype() -> np.dtype:
    """Storage dtype for new tensors on this thread (float32 unless overridden)."""
    return getattr(_local, "dtype", np.dtype(np.float32))


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """
    Temporarily change the storage dtype of new tensors on this thread.

    Training always runs in float32; float64 is used by gradient checks so that
    finite differences are not swamped by rounding.
    """
    previous = get_default_dtype()
    _local.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _local.dtype = previous


class Tensor:
    """
    n-dimensional floating-point array with optional gradient.

    Attributes:
        data: Row-major numpy array (float32 by default)
        requires_grad: Whether gradients flow into this tensor
        grad: None or an array with the same shape as ``data``
        node: Tape node that produced this tensor (None for leaves)
        name: Optional label, used in checkpoints and error messages
    """

    __slots__ = ("data", "requires_grad", "grad", "node", "name", "__weakref__")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        array = np.array(data, dtype=get_default_dtype(), copy=True, order="C")
        if array.size == 0:
            raise EmptyTensorError(f"tensor shape {array.shape} has a zero extent")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional["Node"] = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        """Wrap an already-owned array without copying."""
        tensor = cls.__new__(cls)
        tensor.data = np.ascontiguousarray(array, dtype=get_default_dtype())
        tensor.requires_grad = False
        tensor.grad = None
        tensor.node = None
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        """Return a copy of the data."""
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        """Leaf copy of this tensor that does not track gradients."""
        return Tensor(self.data)

    # Operator sugar; the functions live in ``ops``.
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    def __rmul__(self, other):
        from .ops import mul
        return mul(self, other)

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def reshape(self, *shape) -> "Tensor":
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass(eq=False)
class Node:
    """One tape entry: op kind, inputs, saved activations and a backward closure."""

    graph: "Graph"
    index: int
    op: str
    inputs: Tuple[Tensor, ...]
    input_ids: Tuple[Optional[int], ...]
    output: Tensor
    backward: BackwardFn
    saved: Dict[str, Any] = field(default_factory=dict)


class Graph:
    """
    Append-only computation tape.

    Used as a context manager, the graph becomes the active tape on the current
    thread so that operations on parameter leaves are recorded into it. Outside
    an entered graph each leaf-only operation starts an implicit tape; combining
    results from several tapes merges the implicit ones into a single tape.
    Results from two different explicit tapes cannot be combined.
    """

    def __init__(self, implicit: bool = False):
        self.nodes: List[Node] = []
        self.implicit = implicit

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor,
               backward: BackwardFn, saved: Optional[Dict[str, Any]] = None) -> Node:
        """Append a node; inputs that are themselves tape outputs must already be on this tape."""
        input_ids = tuple(t.node.index if t.node is not None else None for t in inputs)
        node = Node(self, len(self.nodes), op, tuple(inputs), input_ids, output,
                    backward, saved or {})
        self.nodes.append(node)
        return node

    def adopt(self, other: "Graph") -> None:
        """Move every node of ``other`` to the end of this tape, keeping their order."""
        offset = len(self.nodes)
        for node in other.nodes:
            node.graph = self
            node.index += offset
            node.input_ids = tuple(None if i is None else i + offset for i in node.input_ids)
            self.nodes.append(node)
        other.nodes = []

    def release(self) -> None:
        """Drop all nodes so saved activations can be freed."""
        for node in self.nodes:
            node.output.node = None
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Graph":
        stack = getattr(_local, "graphs", None)
        if stack is None:
            stack = []
            _local.graphs = stack
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.graphs.pop()


def active_graph() -> Optional[Graph]:
    """Return the innermost graph entered on this thread, if any."""
    stack = getattr(_local, "graphs", None)
    return stack[-1] if stack else None


def _resolve_graph(inputs: Sequence[Tensor]) -> Graph:
    graphs = list({id(t.node.graph): t.node.graph for t in inputs if t.node is not None}.values())
    if not graphs:
        return active_graph() or Graph(implicit=True)
    explicit = [g for g in graphs if not g.implicit]
    if len(explicit) > 1:
        raise NumericError("operands belong to different computation graphs")
    target = explicit[0] if explicit else graphs[0]
    for graph in graphs:
        if graph is not target:
            target.adopt(graph)
    return target


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording on this thread, e.g. for evaluation."""
    previous = getattr(_local, "recording", True)
    _local.recording = False
    try:
        yield
    finally:
        _local.recording = previous


def apply_op(op: str, data: np.ndarray, inputs: Sequence[Tensor],
             backward: BackwardFn, saved: Optional[Dict[str, Any]] = None) -> Tensor:
    """
    Wrap ``data`` as the output of ``op`` and record it on the tape when needed.

    ``backward`` receives the gradient w.r.t. the output and returns one
    gradient (or None) per input, each shaped like that input.
    """
    out = Tensor._wrap(data)
    if getattr(_local, "recording", True) and any(t.requires_grad for t in inputs):
        graph = _resolve_graph(inputs)
        out.requires_grad = True
        out.node = graph.record(op, inputs, out, backward, saved)
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = np.array(grad, dtype=tensor.data.dtype, copy=True)
    else:
        tensor.grad = tensor.grad + grad.astype(tensor.data.dtype, copy=False)


def backward(loss: Tensor) -> None:
    """
    Populate ``grad`` of every requires_grad tensor reachable from ``loss``.

    Gradients accumulate additively, both across fan-out inside one graph and
    across repeated calls.
    """
    if loss.ndim != 0:
        raise NotScalarError(f"backward() needs a rank-0 loss, got shape {loss.shape}")
    if loss.node is None:
        raise NumericError("loss is not attached to a computation graph")

    graph = loss.node.graph
    pending: Dict[int, np.ndarray] = {loss.node.index: np.ones((), dtype=loss.data.dtype)}

    for node in reversed(graph.nodes[: loss.node.index + 1]):
        grad = pending.pop(node.index, None)
        if grad is None:
            continue
        _accumulate(node.output, grad)
        input_grads = node.backward(grad)
        for tensor, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            input_grad = np.asarray(input_grad)
            if input_grad.shape != tensor.shape:
                raise ShapeMismatchError(
                    f"{node.op} produced gradient of shape {input_grad.shape} "
                    f"for input of shape {tensor.shape}"
                )
            if tensor.node is not None and tensor.node.graph is graph:
                index = tensor.node.index
                pending[index] = pending[index] + input_grad if index in pending else input_grad
            else:
                _accumulate(tensor, input_grad)
