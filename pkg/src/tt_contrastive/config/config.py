"""
Central configuration for the tensorized contrastive-learning engine.

This module provides one configuration class per concern:
- Augmentation of the contrastive views
- Training schedule and optimizer of both phases
- Dataset ingestion and splitting
- Model shape (encoder, projection head, tensor-train factorization)
- Compression-analysis assumptions
- Benchmark harness

Values are resolved in increasing precedence: dataclass defaults, ``TTC_*``
environment variables, a JSON config file, command-line overrides.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..errors import ConfigError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

CLASSIFIER_VARIANTS = ("two-layer", "single-layer")
SPLIT_MODES = ("stratified", "global")
BENCH_MODES = ("layer", "training")
ACCUMULATE_DTYPES = ("float64", "float32")


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.lower() in ('true', '1', 'yes')


def _env_ints(name: str, default: Tuple[int, ...]) -> Tuple[int, ...]:
    value = os.getenv(name)
    if not value:
        return tuple(default)
    return parse_int_list(value, key=name)


def parse_int_list(text: str, key: Optional[str] = None) -> Tuple[int, ...]:
    """Parse '16,32,64' into (16, 32, 64)."""
    try:
        return tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got '{text}'", key=key)


def _require(condition: bool, message: str, key: str) -> None:
    if not condition:
        raise ConfigError(message, key=key)


@dataclass
class AugmentConfig:
    """
    Stochastic augmentation settings for the two contrastive views.

    Jitter strengths are maxima in [0, 1]; each view draws its own factors.
    """

    crop_scale_range: Tuple[float, float] = (0.08, 1.0)
    output_size: Pair = (64, 64)
    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4
    flip_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.crop_scale_range = tuple(float(v) for v in self.crop_scale_range)
        self.output_size = tuple(int(v) for v in self.output_size)
        low, high = self.crop_scale_range
        _require(0 < low <= high <= 1, f"crop scale range must satisfy 0 < min <= max <= 1, got {self.crop_scale_range}",
                 "crop_scale_range")
        _require(all(s >= 1 for s in self.output_size), "output size must be positive", "output_size")
        for key in ("brightness", "contrast", "saturation", "flip_prob"):
            value = getattr(self, key)
            _require(0.0 <= value <= 1.0, f"{key} must lie in [0, 1], got {value}", key)

    @property
    def jitter_strengths(self) -> Tuple[float, float, float]:
        return (self.brightness, self.contrast, self.saturation)

    @classmethod
    def from_env(cls) -> 'AugmentConfig':
        """Create augmentation configuration from environment variables."""
        return cls(
            crop_scale_range=(_env_float('TTC_CROP_MIN', 0.08), _env_float('TTC_CROP_MAX', 1.0)),
            output_size=_env_ints('TTC_VIEW_SIZE', (64, 64)),
            brightness=_env_float('TTC_BRIGHTNESS', 0.4),
            contrast=_env_float('TTC_CONTRAST', 0.4),
            saturation=_env_float('TTC_SATURATION', 0.4),
            flip_prob=_env_float('TTC_FLIP_PROB', 0.5),
            seed=_env_int('TTC_SEED', 0),
        )


@dataclass
class TrainConfig:
    """
    Optimizer, schedule and loop settings for pretraining and fine-tuning.

    The learning rate decays continuously: lr0 * decay_rate ** (step / decay_steps).
    """

    lr0: float = 0.02
    decay_steps: int = 80000
    decay_rate: float = 0.96
    freeze_epochs: int = 50
    epochs: int = 100
    finetune_epochs: int = 50
    finetune_lr0: Optional[float] = None  # None reuses lr0
    batch_size: int = 32
    tau: float = 0.5
    seed: int = 0
    threads: int = 1
    classifier: str = "two-layer"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        """Validate configuration after initialization."""
        _require(self.lr0 >= 0, "lr0 must be non-negative", "lr0")
        _require(self.finetune_lr0 is None or self.finetune_lr0 >= 0,
                 "finetune_lr0 must be non-negative", "finetune_lr0")
        _require(self.decay_steps > 0, "decay_steps must be positive", "decay_steps")
        _require(0 < self.decay_rate <= 1, "decay_rate must lie in (0, 1]", "decay_rate")
        _require(self.epochs > 0, "epochs must be positive", "epochs")
        _require(self.finetune_epochs > 0, "finetune_epochs must be positive", "finetune_epochs")
        _require(0 <= self.freeze_epochs <= self.epochs,
                 f"freeze_epochs ({self.freeze_epochs}) must not exceed epochs ({self.epochs})",
                 "freeze_epochs")
        _require(self.batch_size > 0, "batch_size must be positive", "batch_size")
        _require(self.tau > 0, "tau must be positive", "tau")
        _require(self.threads >= 1, "threads must be >= 1", "threads")
        _require(self.classifier in CLASSIFIER_VARIANTS,
                 f"classifier must be one of {CLASSIFIER_VARIANTS}", "classifier")

    @property
    def effective_finetune_lr0(self) -> float:
        return self.lr0 if self.finetune_lr0 is None else self.finetune_lr0

    @classmethod
    def from_env(cls) -> 'TrainConfig':
        """Create training configuration from environment variables."""
        finetune_lr0 = os.getenv('TTC_FINETUNE_LR0')
        return cls(
            lr0=_env_float('TTC_LR0', 0.02),
            decay_steps=_env_int('TTC_DECAY_STEPS', 80000),
            decay_rate=_env_float('TTC_DECAY_RATE', 0.96),
            freeze_epochs=_env_int('TTC_FREEZE_EPOCHS', 50),
            epochs=_env_int('TTC_EPOCHS', 100),
            finetune_epochs=_env_int('TTC_FINETUNE_EPOCHS', 50),
            finetune_lr0=float(finetune_lr0) if finetune_lr0 else None,
            batch_size=_env_int('TTC_BATCH_SIZE', 32),
            tau=_env_float('TTC_TAU', 0.5),
            seed=_env_int('TTC_SEED', 0),
            threads=_env_int('TTC_THREADS', 1),
            classifier=os.getenv('TTC_CLASSIFIER', 'two-layer'),
        )


@dataclass
class DatasetConfig:
    """Dataset location, decoding size and split policy."""

    root: Optional[str] = None
    image_size: int = 256
    split: str = "stratified"
    train_fraction: float = 0.8
    workers: int = 1

    def __post_init__(self):
        """Validate configuration after initialization."""
        _require(self.image_size >= 1, "image_size must be positive", "image_size")
        _require(self.split in SPLIT_MODES, f"split must be one of {SPLIT_MODES}", "split")
        _require(0 < self.train_fraction < 1, "train_fraction must lie in (0, 1)", "train_fraction")
        _require(self.workers >= 1, "workers must be >= 1", "workers")

    @classmethod
    def from_env(cls) -> 'DatasetConfig':
        """Create dataset configuration from environment variables."""
        return cls(
            root=os.getenv('TTC_DATA_ROOT') or None,
            image_size=_env_int('TTC_IMAGE_SIZE', 256),
            split=os.getenv('TTC_SPLIT', 'stratified'),
            train_fraction=_env_float('TTC_TRAIN_FRACTION', 0.8),
            workers=_env_int('TTC_WORKERS', 1),
        )


@dataclass
class ModelConfig:
    """
    Model shape.

    The encoder is a 1x1 stem followed by dense-connectivity stages given as
    (num_layers, growth_channels); its feature size is the final channel count.
    """

    stem_channels: int = 16
    stages: Tuple[Pair, ...] = ((2, 8), (2, 16))
    kernel: int = 3
    head: Tuple[int, int, int] = (4096, 1024, 512)
    tensorized: bool = False
    in_split: Pair = (8, 8)
    out_split: Pair = (64, 64)
    bond: int = 16
    num_classes: int = 11

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.stages = tuple(tuple(int(v) for v in stage) for stage in self.stages)
        self.head = tuple(int(v) for v in self.head)
        self.in_split = tuple(int(v) for v in self.in_split)
        self.out_split = tuple(int(v) for v in self.out_split)
        _require(self.stem_channels >= 1, "stem_channels must be positive", "stem_channels")
        _require(len(self.stages) >= 1 and all(len(s) == 2 and min(s) >= 1 for s in self.stages),
                 "stages must be non-empty (num_layers, growth) pairs", "stages")
        _require(self.kernel >= 1 and self.kernel % 2 == 1, "kernel must be a positive odd size", "kernel")
        _require(len(self.head) == 3 and min(self.head) >= 1,
                 "projection head needs three positive widths", "head")
        _require(len(self.in_split) == 2 and len(self.out_split) == 2, "splits need two factors", "in_split")
        _require(self.bond >= 1, "bond must be >= 1", "bond")
        _require(self.num_classes >= 2, "num_classes must be >= 2", "num_classes")

    @property
    def feature_dim(self) -> int:
        return self.stem_channels + sum(layers * growth for layers, growth in self.stages)

    @classmethod
    def from_env(cls) -> 'ModelConfig':
        """Create model configuration from environment variables."""
        return cls(
            stem_channels=_env_int('TTC_STEM_CHANNELS', 16),
            kernel=_env_int('TTC_KERNEL', 3),
            head=_env_ints('TTC_HEAD', (4096, 1024, 512)),
            tensorized=_env_bool('TTC_TENSORIZED', False),
            in_split=_env_ints('TTC_IN_SPLIT', (8, 8)),
            out_split=_env_ints('TTC_OUT_SPLIT', (64, 64)),
            bond=_env_int('TTC_BOND', 16),
        )


@dataclass
class CompressionAssumptions:
    """
    Dimension assumptions behind the whole-model parameter accounting.

    The encoder is counted as an opaque number of parameters. These values are
    reconstructions and are echoed in every report.
    """

    encoder_params: int = 8_000_000
    flatten_dim: int = 65536
    head: Tuple[int, int, int] = (4096, 1024, 512)
    in_split: Pair = (256, 256)
    out_split: Pair = (64, 64)
    include_bias: bool = False

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.encoder_params = int(self.encoder_params)
        self.head = tuple(int(v) for v in self.head)
        self.in_split = tuple(int(v) for v in self.in_split)
        self.out_split = tuple(int(v) for v in self.out_split)
        _require(self.encoder_params >= 0, "encoder_params must be non-negative", "encoder_params")
        _require(self.flatten_dim >= 1, "flatten_dim must be positive", "flatten_dim")
        _require(len(self.head) >= 1 and min(self.head) >= 1, "head widths must be positive", "head")

    @classmethod
    def from_env(cls) -> 'CompressionAssumptions':
        """Create compression assumptions from environment variables."""
        return cls(
            encoder_params=int(_env_float('TTC_ENCODER_PARAMS', 8.0e6)),
            flatten_dim=_env_int('TTC_FLATTEN_DIM', 65536),
            head=_env_ints('TTC_ANALYZE_HEAD', (4096, 1024, 512)),
            in_split=_env_ints('TTC_ANALYZE_IN_SPLIT', (256, 256)),
            out_split=_env_ints('TTC_ANALYZE_OUT_SPLIT', (64, 64)),
            include_bias=_env_bool('TTC_INCLUDE_BIAS', False),
        )


@dataclass
class BenchConfig:
    """Benchmark harness settings."""

    mode: str = "layer"
    batches: Tuple[int, ...] = (8, 16, 32)
    repeats: int = 5
    warmup: int = 1
    in_dim: int = 65536
    out_dim: int = 4096
    in_split: Pair = (256, 256)
    out_split: Pair = (64, 64)
    bond: int = 16
    accumulate: str = "float32"
    threads: int = 1
    sm_count: Optional[int] = None
    alt_order: bool = False
    seed: int = 0

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.batches = tuple(int(b) for b in self.batches)
        self.in_split = tuple(int(v) for v in self.in_split)
        self.out_split = tuple(int(v) for v in self.out_split)
        _require(self.mode in BENCH_MODES, f"mode must be one of {BENCH_MODES}", "mode")
        _require(len(self.batches) >= 1 and min(self.batches) >= 1, "batches must be positive", "batches")
        _require(self.repeats >= 5, "repeats must be >= 5", "repeats")
        _require(self.warmup >= 1, "warmup must be >= 1", "warmup")
        _require(self.accumulate in ACCUMULATE_DTYPES,
                 f"accumulate must be one of {ACCUMULATE_DTYPES}", "accumulate")
        _require(self.threads >= 1, "threads must be >= 1", "threads")
        _require(self.sm_count is None or self.sm_count >= 2, "sm_count must be >= 2", "sm_count")

    @classmethod
    def from_env(cls) -> 'BenchConfig':
        """Create benchmark configuration from environment variables."""
        return cls(
            mode=os.getenv('TTC_BENCH_MODE', 'layer'),
            batches=_env_ints('TTC_BENCH_BATCHES', (8, 16, 32)),
            repeats=_env_int('TTC_BENCH_REPEATS', 5),
            warmup=_env_int('TTC_BENCH_WARMUP', 1),
            accumulate=os.getenv('TTC_BENCH_ACCUMULATE', 'float32'),
            threads=_env_int('TTC_THREADS', 1),
        )


@dataclass
class RunConfig:
    """
    Fully resolved configuration of one CLI run.

    Every run writes ``to_dict()`` into its metadata file.
    """

    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    compression: CompressionAssumptions = field(default_factory=CompressionAssumptions)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output_dir: str = "runs"

    @classmethod
    def from_env(cls) -> 'RunConfig':
        """Create the run configuration from environment variables."""
        return cls(
            augment=AugmentConfig.from_env(),
            train=TrainConfig.from_env(),
            dataset=DatasetConfig.from_env(),
            model=ModelConfig.from_env(),
            compression=CompressionAssumptions.from_env(),
            bench=BenchConfig.from_env(),
            output_dir=os.getenv('TTC_OUTPUT_DIR', 'runs'),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def merged(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        """
        Return a copy with section-wise overrides applied.

        Args:
            overrides: ``{"train": {"lr0": 0.01}, "output_dir": "..."}``; keys that
                are not configuration fields raise ConfigError.
        """
        sections = {f.name for f in fields(self) if f.name != "output_dir"}
        result = self
        for key, value in overrides.items():
            if key == "output_dir":
                result = replace(result, output_dir=str(value))
            elif key in sections:
                if not isinstance(value, Mapping):
                    raise ConfigError(f"section '{key}' must be an object", key=key)
                result = replace(result, **{key: _merge_section(getattr(result, key), value, key)})
            else:
                raise ConfigError(f"unknown configuration key '{key}'", key=key)
        return result


def _merge_section(section: Any, values: Mapping[str, Any], section_name: str) -> Any:
    names = {f.name for f in fields(section)}
    for key in values:
        if key not in names:
            raise ConfigError(f"unknown configuration key '{section_name}.{key}'",
                              key=f"{section_name}.{key}")
    try:
        return replace(section, **dict(values))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in section '{section_name}': {e}", key=section_name)


def _reject_constant(name: str) -> None:
    raise ValueError(f"non-finite constant {name} is not allowed")


def read_config_file(path: Path) -> Dict[str, Any]:
    """Parse a JSON config file strictly (no comments, object at top level)."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f, parse_constant=_reject_constant)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", key="config")
    except ValueError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}", key="config")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object", key="config")
    return data


def load_config(path: Optional[Path] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Central function for loading the configuration.

    Starts from environment variables, then applies the JSON file at ``path``
    and finally ``overrides`` (typically command-line flags).

    Returns:
        RunConfig: Fully resolved run configuration
    """
    try:
        config = RunConfig.from_env()
    except ValueError as e:
        raise ConfigError(f"invalid environment configuration: {e}")
    if path is not None:
        config = config.merged(read_config_file(path))
        logger.info(f"Configuration file applied: {path}")
    if overrides:
        config = config.merged(overrides)
    logger.debug(f"Resolved configuration: {config.to_dict()}")
    return config
