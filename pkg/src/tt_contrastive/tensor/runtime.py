"""
Process-wide runtime settings for tensor kernels.

Holds the contraction thread count, the accumulator dtype used inside
contractions and reductions, and the multiply-add counters that back the
FLOP assertions of the layer and benchmark code.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_settings_lock = threading.Lock()
_num_threads = 1
_accumulate_dtype = np.dtype(np.float64)
_executor: Optional[ThreadPoolExecutor] = None
_executor_threads = 0

_local = threading.local()


def set_num_threads(threads: int) -> None:
    """
    Set the number of worker threads used inside a single contraction.

    Results are bitwise-deterministic for a fixed thread count because the
    work split depends only on that count.
    """
    global _num_threads
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    with _settings_lock:
        _num_threads = int(threads)
    logger.debug(f"Contraction thread count set to {threads}")


def get_num_threads() -> int:
    """Return the configured contraction thread count."""
    return _num_threads


def set_accumulate_dtype(dtype) -> None:
    """Set the accumulator dtype for contractions and reductions ('float64' or 'float32')."""
    global _accumulate_dtype
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported accumulator dtype: {dtype}")
    with _settings_lock:
        _accumulate_dtype = resolved


def get_accumulate_dtype() -> np.dtype:
    """Return the accumulator dtype."""
    return _accumulate_dtype


def _get_executor(threads: int) -> ThreadPoolExecutor:
    global _executor, _executor_threads
    with _settings_lock:
        if _executor is None or _executor_threads != threads:
            if _executor is not None:
                _executor.shutdown(wait=True)
            _executor = ThreadPoolExecutor(max_workers=threads, thread_name_prefix="contract")
            _executor_threads = threads
        return _executor


class FlopCounter:
    """
    Counts multiply-adds performed by forward contractions.

    Outer products (no contracted axis) only broadcast and are not counted,
    so a biased layer reports the weight contraction alone.

    Usage::

        with FlopCounter() as counter:
            tt_forward(layer, x)
        counter.multiply_adds
    """

    def __init__(self):
        self.multiply_adds = 0
        self.calls = 0

    @property
    def flops(self) -> int:
        """Floating point operations, counting a multiply-add as two."""
        return 2 * self.multiply_adds

    def add(self, multiply_adds: int) -> None:
        self.multiply_adds += int(multiply_adds)
        self.calls += 1

    def __enter__(self) -> "FlopCounter":
        stack = getattr(_local, "counters", None)
        if stack is None:
            stack = []
            _local.counters = stack
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.counters.remove(self)


def record_multiply_adds(count: int) -> None:
    """Add ``count`` multiply-adds to every active counter on this thread."""
    for counter in getattr(_local, "counters", None) or ():
        counter.add(count)


def tensordot(a: np.ndarray, b: np.ndarray,
              axes_a: Sequence[int], axes_b: Sequence[int],
              out_dtype=np.float32) -> np.ndarray:
    """
    Contract ``a`` and ``b`` over paired axes using the configured accumulator.

    When more than one thread is configured and ``a`` has a free axis, the first
    free axis is split into fixed chunks that are contracted concurrently.
    """
    acc = _accumulate_dtype
    axes_a = list(axes_a)
    axes_b = list(axes_b)
    threads = _num_threads
    free_a = [k for k in range(a.ndim) if k not in axes_a]

    if threads > 1 and free_a and a.shape[free_a[0]] >= threads:
        split_axis = free_a[0]
        bounds = np.linspace(0, a.shape[split_axis], threads + 1).astype(int)
        b_acc = b.astype(acc, copy=False)

        def _chunk(i: int) -> np.ndarray:
            index = [slice(None)] * a.ndim
            index[split_axis] = slice(bounds[i], bounds[i + 1])
            part = a[tuple(index)].astype(acc, copy=False)
            return np.tensordot(part, b_acc, axes=(axes_a, axes_b))

        executor = _get_executor(threads)
        parts: List[np.ndarray] = list(executor.map(_chunk, range(threads)))
        result = np.concatenate(parts, axis=0)
    else:
        result = np.tensordot(a.astype(acc, copy=False), b.astype(acc, copy=False),
                              axes=(axes_a, axes_b))
    return np.asarray(result, dtype=out_dtype)
