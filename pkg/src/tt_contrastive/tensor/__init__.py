"""
Tensor package: dense arrays with tape-based reverse-mode differentiation.

Provides the Tensor/Graph types, the fixed operation set the models use, the
runtime knobs for contraction threading and accumulation, and the
finite-difference oracle used by the gradient tests.
"""

from .core import Graph, Node, Tensor, active_graph, apply_op, backward, get_default_dtype, no_grad, precision
from .gradcheck import finite_diff_grad, max_relative_error
from .ops import (
    MAX_RANK,
    add,
    clamp,
    concat,
    contract,
    elementwise,
    exp,
    expand,
    extract_patches,
    log,
    max_,
    mean,
    mul,
    reduce,
    relu,
    reshape,
    scale,
    sub,
    sum_,
    transpose,
)
from .runtime import (
    FlopCounter,
    get_accumulate_dtype,
    get_num_threads,
    set_accumulate_dtype,
    set_num_threads,
)

__all__ = [
    'Tensor', 'Graph', 'Node', 'active_graph', 'apply_op', 'backward',
    'get_default_dtype', 'precision', 'no_grad',
    'finite_diff_grad', 'max_relative_error',
    'MAX_RANK', 'contract', 'expand', 'elementwise', 'add', 'sub', 'mul', 'relu',
    'exp', 'log', 'scale', 'clamp', 'reduce', 'sum_', 'mean', 'max_',
    'reshape', 'transpose', 'concat', 'extract_patches',
    'FlopCounter', 'set_num_threads', 'get_num_threads',
    'set_accumulate_dtype', 'get_accumulate_dtype',
]
