"""
Wall-clock benchmarks of dense versus TT-factorized layers and of full
pretraining iterations across a batch-size sweep.

Each timed sample is one iteration: forward, backward and (in training mode)
the optimizer update. Inputs are generated or augmented before the timed
region and are identical across variants for a given batch size.
"""

import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import replace
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from ..compression import flop_parity_bond, flop_ratio, model_assumptions, model_reduction
from ..config import AugmentConfig, BenchConfig, ModelConfig, TrainConfig
from ..dataset import Dataset
from ..errors import AllocationError, DatasetEmptyError
from ..monitoring import host_description
from ..nn import DenseLayer, TTDenseLayer, TTDenseSpec, add_bias, dense_forward, tt_forward, tt_init
from ..pipeline import AdamState, ModelGraph, build_model, contrastive_step, lr_at, make_views, tt_spec
from ..tensor import (
    FlopCounter,
    Graph,
    Tensor,
    backward,
    contract,
    get_accumulate_dtype,
    get_num_threads,
    no_grad,
    reshape,
    set_accumulate_dtype,
    set_num_threads,
    sum_,
    transpose,
)
from .report import BenchReport, BenchRow
from .timing import Timer, TimingStats, check_repeats, sm_batch_sweep, time_repeats

logger = logging.getLogger(__name__)

BLAS_THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

LayerForward = Callable[[object, Tensor], Tensor]


def tt_forward_alt(layer: TTDenseLayer, x: Tensor) -> Tensor:
    """
    TT forward with the cores taken in the opposite order: core2 first, then core1.

    Per sample: U[a,d,r] = Σ_b X[a,b]·core2[b,d,r], then
    Y[d,c] = Σ_{a,r} U[a,d,r]·core1[a,c,r], transposed back to (c, d).
    Costs a·b·d·r + a·c·d·r multiply-adds per sample.
    """
    a, b = layer.spec.in_split
    c, d = layer.spec.out_split
    batch = x.shape[0]
    xs = reshape(x, (batch, a, b))
    u = contract(xs, layer.core2, [(2, 0)])              # (batch, a, d, r)
    y = contract(u, layer.core1, [(1, 0), (3, 2)])       # (batch, d, c)
    y = transpose(y, (0, 2, 1))
    return add_bias(reshape(y, (batch, c * d)), layer.bias)


@contextmanager
def runtime_settings(threads: Optional[int] = None, accumulate: Optional[str] = None) -> Iterator[None]:
    """Apply contraction thread count and accumulator dtype, restoring both afterwards."""
    previous_threads, previous_dtype = get_num_threads(), get_accumulate_dtype()
    if threads is not None:
        set_num_threads(threads)
    if accumulate is not None:
        set_accumulate_dtype(accumulate)
    try:
        yield
    finally:
        set_num_threads(previous_threads)
        set_accumulate_dtype(previous_dtype)


def bench_environment() -> Dict[str, object]:
    """Settings the timings depend on, recorded in every report."""
    return {
        "threads": get_num_threads(),
        "accumulate_dtype": str(get_accumulate_dtype()),
        "float_dtype": "float32",
        "blas_env": {name: os.environ[name] for name in BLAS_THREAD_VARIABLES if name in os.environ},
        "host": host_description(),
    }


def predicted_sign(spec: TTDenseSpec) -> int:
    """+1 when the bond is below FLOP parity (TT predicted faster), -1 above, 0 at parity."""
    parity = flop_parity_bond(spec)
    if spec.bond < parity:
        return 1
    return -1 if spec.bond > parity else 0


def resolve_batches(cfg: BenchConfig) -> List[int]:
    """Batch sizes of a run: the SM-anchored sweep when ``sm_count`` is set."""
    if cfg.sm_count:
        return sm_batch_sweep(cfg.sm_count)
    return list(cfg.batches)


def bench_spec(cfg: BenchConfig) -> TTDenseSpec:
    spec = TTDenseSpec(tuple(cfg.in_split), tuple(cfg.out_split), cfg.bond)
    return spec.validate(cfg.in_dim, cfg.out_dim)


def layer_input(in_dim: int, batch: int, seed: int) -> np.ndarray:
    """Fixed-seed standard normal input of shape (batch, in_dim)."""
    rng = np.random.default_rng([seed, batch])
    return rng.standard_normal((batch, in_dim), dtype=np.float32)


def _bench_dense(spec: TTDenseSpec, seed: int) -> DenseLayer:
    # Drawn in float32 directly; the full-scale weight is 1 GiB already.
    rng = np.random.default_rng(seed)
    s = np.float32(math.sqrt(6.0 / (spec.in_dim + spec.out_dim)))
    weight = rng.random((spec.in_dim, spec.out_dim), dtype=np.float32)
    weight *= 2 * s
    weight -= s
    return DenseLayer(Tensor._wrap(weight), Tensor(np.zeros(spec.out_dim)), name="bench.dense")


def _iteration(layer, forward: LayerForward, x: Tensor) -> None:
    with Graph() as graph:
        backward(sum_(forward(layer, x)))
    graph.release()
    for _, tensor in layer.parameters():
        tensor.zero_grad()


def _forward_flops(forward: Callable[[], Tensor]) -> int:
    with no_grad(), FlopCounter() as counter:
        forward()
    return counter.flops


def bench_layer(spec: TTDenseSpec, batch_sizes: Sequence[int], repeats: int = 5, warmup: int = 1,
                timer: Timer = time.perf_counter, seed: int = 0, alt_order: bool = False,
                threads: Optional[int] = None, accumulate: Optional[str] = None) -> BenchReport:
    """
    Time forward+backward of a dense layer and its TT counterpart at each batch size.

    Rows are ordered by batch size as given, then dense, tt and (with
    ``alt_order``) tt-alt. The flops column is the measured forward count.

    Raises:
        ConfigError: repeats < 5 or warmup < 1
        AllocationError: weights or inputs cannot be allocated
    """
    check_repeats(repeats, warmup)
    batches = list(dict.fromkeys(int(b) for b in batch_sizes))
    with runtime_settings(threads, accumulate):
        try:
            dense = _bench_dense(spec, seed)
            tt = tt_init(spec, seed, name="bench.tt")
        except MemoryError:
            raise AllocationError(f"cannot allocate a {spec.in_dim}x{spec.out_dim} weight",
                                  size=spec.in_dim * spec.out_dim)
        variants = [("dense", dense, dense_forward), ("tt", tt, tt_forward)]
        if alt_order:
            variants.append(("tt-alt", tt, tt_forward_alt))

        report = BenchReport(mode="layer", environment=bench_environment(), setup={
            "in_dim": spec.in_dim,
            "out_dim": spec.out_dim,
            "in_split": list(spec.in_split),
            "out_split": list(spec.out_split),
            "bond": spec.bond,
            "repeats": repeats,
            "warmup": warmup,
            "seed": seed,
            "flop_ratio": float(flop_ratio(spec)),
            "flop_parity_bond": float(flop_parity_bond(spec)),
        }, predicted_sign=predicted_sign(spec))
        if report.predicted_sign < 0:
            logger.warning(f"Bond {spec.bond} is above FLOP parity "
                           f"{float(flop_parity_bond(spec)):.2f}; TT is expected to be slower")

        for batch in batches:
            try:
                x = Tensor._wrap(layer_input(spec.in_dim, batch, seed))
                for variant, layer, forward in variants:
                    flops = _forward_flops(lambda: forward(layer, x))
                    samples = time_repeats(lambda: _iteration(layer, forward, x), repeats, warmup, timer)
                    stats = TimingStats.from_samples(samples)
                    report.rows.append(BenchRow(batch, variant, stats.median_s, stats.min_s,
                                                stats.mean_s, flops))
                    logger.info(f"[layer] batch {batch} {variant}: median {stats.median_s * 1e3:.2f} ms")
            except MemoryError:
                raise AllocationError(f"cannot allocate buffers for batch {batch}", size=batch)
    for batch in batches:
        logger.info(f"[layer] batch {batch}: speedup {report.speedup(batch):+.2%}")
    return report


def _training_models(cfg: ModelConfig, seed: int) -> Dict[str, ModelGraph]:
    models = {
        "dense": build_model(replace(cfg, tensorized=False), seed),
        "tt": build_model(replace(cfg, tensorized=True), seed),
    }
    for model in models.values():
        model.set_all_trainable(True)
    return models


def bench_training(model_cfg: ModelConfig, train_cfg: TrainConfig, augment_cfg: AugmentConfig,
                   data: Dataset, batch_sizes: Sequence[int], repeats: int = 5, warmup: int = 1,
                   timer: Timer = time.perf_counter, workers: int = 1,
                   threads: Optional[int] = None, accumulate: Optional[str] = None) -> BenchReport:
    """
    Time full pretraining iterations of the general and the tensorized model.

    Views are augmented before the timed region; forward, NT-Xent, backward
    and the ADAM update are timed. Batches larger than the dataset cycle
    through it.

    Raises:
        DatasetEmptyError: no images
        ConfigError: repeats < 5 or warmup < 1
        IndivisibleSplitError: the TT splits do not factor the first head layer
    """
    if len(data) == 0:
        raise DatasetEmptyError("training benchmark needs at least one image")
    check_repeats(repeats, warmup)
    spec = tt_spec(model_cfg)
    batches = list(dict.fromkeys(int(b) for b in batch_sizes))
    images = data.images()

    with runtime_settings(threads, accumulate):
        models = _training_models(model_cfg, train_cfg.seed)
        encoder_params = models["dense"].encoder.param_count()
        predicted = model_reduction(model_assumptions(model_cfg, encoder_params), model_cfg.bond)
        report = BenchReport(mode="training", environment=bench_environment(), setup={
            "feature_dim": model_cfg.feature_dim,
            "head": list(model_cfg.head),
            "in_split": list(model_cfg.in_split),
            "out_split": list(model_cfg.out_split),
            "bond": model_cfg.bond,
            "image_size": list(augment_cfg.output_size),
            "repeats": repeats,
            "warmup": warmup,
            "seed": train_cfg.seed,
            "params": {variant: model.param_count() for variant, model in models.items()},
            "predicted_tt_params": predicted.total_actual,
        }, predicted_sign=predicted_sign(spec))

        for batch in batches:
            try:
                indices = np.arange(batch) % len(data)
                views = make_views(images, indices, augment_cfg, epoch=0, workers=workers)
                for variant, model in models.items():
                    flops = _forward_flops(lambda: model.project(model.encode(Tensor(views))))
                    state = AdamState.from_config(train_cfg)
                    lr = lr_at(train_cfg, 0)
                    samples = time_repeats(lambda: contrastive_step(model, views, train_cfg.tau, state, lr),
                                           repeats, warmup, timer)
                    stats = TimingStats.from_samples(samples)
                    report.rows.append(BenchRow(batch, variant, stats.median_s, stats.min_s,
                                                stats.mean_s, flops))
                    logger.info(f"[training] batch {batch} {variant}: median {stats.median_s * 1e3:.2f} ms")
            except MemoryError:
                raise AllocationError(f"cannot allocate buffers for batch {batch}", size=batch)
    return report
