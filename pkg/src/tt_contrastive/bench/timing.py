"""Timing primitives: repeat loops, summary statistics and the speedup metric."""

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from ..errors import ConfigError, NonPositiveTimeError

logger = logging.getLogger(__name__)

MIN_REPEATS = 5
MIN_WARMUP = 1

Timer = Callable[[], float]


def speedup(t_base: float, t_tt: float) -> float:
    """
    Rate of reduction in computational time, (t_base - t_tt) / t_base.

    Negative when the factorized variant is slower.

    Raises:
        NonPositiveTimeError: either time is zero or negative
    """
    if t_base <= 0 or t_tt <= 0:
        raise NonPositiveTimeError(f"times must be positive, got base={t_base} tt={t_tt}")
    return (t_base - t_tt) / t_base


@dataclass(frozen=True)
class TimingStats:
    """Summary of the timed repeats of one (batch, variant) cell."""

    median_s: float
    min_s: float
    mean_s: float
    samples: int

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "TimingStats":
        values = np.asarray(samples, dtype=np.float64)
        if values.size == 0:
            raise NonPositiveTimeError("no timing samples")
        if np.any(values <= 0):
            raise NonPositiveTimeError(f"non-positive timing sample in {values.tolist()}")
        return cls(float(np.median(values)), float(values.min()), float(values.mean()), int(values.size))


def check_repeats(repeats: int, warmup: int) -> None:
    if repeats < MIN_REPEATS:
        raise ConfigError(f"repeats must be >= {MIN_REPEATS}, got {repeats}", key="repeats")
    if warmup < MIN_WARMUP:
        raise ConfigError(f"warmup must be >= {MIN_WARMUP}, got {warmup}", key="warmup")


def time_repeats(fn: Callable[[], object], repeats: int, warmup: int,
                 timer: Timer = time.perf_counter) -> List[float]:
    """
    Run ``fn`` ``warmup`` times untimed, then ``repeats`` times under ``timer``.

    The timer is read exactly twice per timed repeat and never during warmup.
    """
    check_repeats(repeats, warmup)
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        start = timer()
        fn()
        samples.append(timer() - start)
    return samples


def sm_batch_sweep(sm_count: int, steps: int = 4) -> List[int]:
    """
    Batch sizes from sm_count/2 up to 2·sm_count, evenly spaced.

    The sweep is anchored on the number of streaming multiprocessors of the
    accelerator the numbers are compared against.
    """
    if sm_count < 2:
        raise ConfigError(f"sm_count must be >= 2, got {sm_count}", key="sm_count")
    if steps < 2:
        raise ConfigError(f"sweep needs at least 2 steps, got {steps}", key="steps")
    values = np.linspace(sm_count // 2, 2 * sm_count, steps)
    return sorted({int(round(v)) for v in values})
