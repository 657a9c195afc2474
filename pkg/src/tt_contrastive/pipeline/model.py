"""
Composite model: encoder, projection head and optional classifier head.

The projection head is [feat→h0 (dense or TT), h0→h1, h1→h2] with relu between
layers. Snipping removes the last two projection layers and attaches a dense
classifier on top of the surviving h0-wide layer.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import ModelConfig
from ..config.config import CLASSIFIER_VARIANTS
from ..errors import (
    CheckpointFormatError,
    ConfigError,
    HeadAlreadySnippedError,
    MissingClassifierError,
)
from ..nn import (
    DenseLayer,
    Encoder,
    EncoderConfig,
    TTDenseLayer,
    TTDenseSpec,
    dense_init,
    encoder_init,
    read_container,
    tt_init,
    write_container,
)
from ..tensor import Tensor, relu

logger = logging.getLogger(__name__)

HeadLayer = Union[DenseLayer, TTDenseLayer]


def derive_seed(seed: int, *path: int) -> int:
    """Stable child seed for one component of the model."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def encoder_config(cfg: ModelConfig) -> EncoderConfig:
    return EncoderConfig(stages=tuple(cfg.stages), kernel=cfg.kernel, stem_channels=cfg.stem_channels)


def tt_spec(cfg: ModelConfig) -> TTDenseSpec:
    """TT plan of the first projection layer, validated against the model dims."""
    spec = TTDenseSpec(tuple(cfg.in_split), tuple(cfg.out_split), cfg.bond)
    return spec.validate(cfg.feature_dim, cfg.head[0])


@dataclass
class ModelGraph:
    """
    Ordered composition of layers with per-layer trainable flags.

    Attributes:
        config: Shape configuration the model was built from
        encoder: Convolutional encoder (stem plus stages)
        projection: Projection head layers; the first may be TT-factorized
        classifier: Classifier head layers, empty until snip_and_attach
        classifier_variant: 'two-layer' or 'single-layer' once attached
    """

    config: ModelConfig
    encoder: Encoder
    projection: List[HeadLayer]
    classifier: List[DenseLayer] = field(default_factory=list)
    classifier_variant: Optional[str] = None

    @property
    def snipped(self) -> bool:
        return len(self.projection) < 3

    @property
    def tensorized(self) -> bool:
        return isinstance(self.projection[0], TTDenseLayer)

    @property
    def layers(self) -> list:
        return [*self.encoder.layers, *self.projection, *self.classifier]

    def trainable_mask(self) -> List[bool]:
        return [layer.trainable for layer in self.layers]

    def set_encoder_trainable(self, trainable: bool) -> None:
        self.encoder.set_trainable(trainable)

    def set_all_trainable(self, trainable: bool = True) -> None:
        for layer in self.layers:
            layer.set_trainable(trainable)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [p for layer in self.layers for p in layer.parameters()]

    def trainable_parameters(self) -> List[Tuple[str, Tensor]]:
        return [p for layer in self.layers if layer.trainable for p in layer.parameters()]

    def zero_grad(self) -> None:
        for _, tensor in self.parameters():
            tensor.zero_grad()

    def param_count(self, include_bias: bool = True) -> int:
        return sum(layer.param_count(include_bias) for layer in self.layers)

    def encode(self, images: Tensor) -> Tensor:
        return self.encoder(images)

    def project(self, features: Tensor) -> Tensor:
        """Contrastive latent vectors; relu between head layers, none after the last."""
        h = features
        for i, layer in enumerate(self.projection):
            h = layer(h)
            if i < len(self.projection) - 1:
                h = relu(h)
        return h

    def classify(self, images: Tensor) -> Tensor:
        """Class logits from the snipped head plus classifier."""
        if not self.classifier:
            raise MissingClassifierError("model has no classifier head; run snip_and_attach first")
        h = relu(self.projection[0](self.encode(images)))
        for i, layer in enumerate(self.classifier):
            h = layer(h)
            if i < len(self.classifier) - 1:
                h = relu(h)
        return h


def build_model(cfg: ModelConfig, seed: int) -> ModelGraph:
    """
    Build the pretraining model: encoder plus full projection head.

    The first projection layer is TT-factorized when ``cfg.tensorized`` is set.

    Raises:
        IndivisibleSplitError: the TT splits do not factor feat→head[0]
    """
    encoder = encoder_init(encoder_config(cfg), derive_seed(seed, 0))
    widths = [cfg.feature_dim, *cfg.head]
    if cfg.tensorized:
        first: HeadLayer = tt_init(tt_spec(cfg), derive_seed(seed, 1), name="projection0")
    else:
        first = dense_init(widths[0], widths[1], derive_seed(seed, 1), name="projection0")
    projection: List[HeadLayer] = [first]
    for i in (1, 2):
        projection.append(dense_init(widths[i], widths[i + 1], derive_seed(seed, i + 1),
                                     name=f"projection{i}"))
    model = ModelGraph(cfg, encoder, projection)
    kind = f"TT (bond {cfg.bond})" if cfg.tensorized else "dense"
    logger.info(f"Model built: {model.param_count():,} parameters, first projection layer {kind}")
    return model


def snip_and_attach(model: ModelGraph, variant: str = "two-layer", seed: int = 0) -> ModelGraph:
    """
    Remove the last two projection layers and attach a classifier head.

    Surviving layers are shared with ``model``, so their parameters are
    bitwise-preserved.

    Raises:
        HeadAlreadySnippedError: the projection head is already cut
    """
    if model.snipped or model.classifier:
        raise HeadAlreadySnippedError("projection head has already been snipped")
    if variant not in CLASSIFIER_VARIANTS:
        raise ConfigError(f"unknown classifier variant '{variant}'", key="classifier")
    width = model.config.head[0]
    classes = model.config.num_classes
    if variant == "two-layer":
        classifier = [dense_init(width, width, derive_seed(seed, 10), name="classifier0"),
                      dense_init(width, classes, derive_seed(seed, 11), name="classifier1")]
    else:
        classifier = [dense_init(width, classes, derive_seed(seed, 10), name="classifier0")]
    snipped = ModelGraph(model.config, model.encoder, model.projection[:1], classifier, variant)
    removed = sum(layer.param_count() for layer in model.projection[1:])
    logger.info(f"Projection head snipped ({removed:,} parameters removed), "
                f"{variant} classifier attached")
    return snipped


def _layer_manifest(layer) -> Dict[str, Any]:
    entry: Dict[str, Any] = {"name": layer.name, "kind": layer.kind, "trainable": layer.trainable}
    if isinstance(layer, TTDenseLayer):
        entry["spec"] = {"in_split": list(layer.spec.in_split), "out_split": list(layer.spec.out_split),
                         "bond": layer.spec.bond}
    entry["parameters"] = [name for name, _ in layer.parameters()]
    return entry


def save_model(model: ModelGraph, path, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write the model into the checkpoint container."""
    manifest = {
        "model_config": {
            "stem_channels": model.config.stem_channels,
            "stages": [list(s) for s in model.config.stages],
            "kernel": model.config.kernel,
            "head": list(model.config.head),
            "tensorized": model.config.tensorized,
            "in_split": list(model.config.in_split),
            "out_split": list(model.config.out_split),
            "bond": model.config.bond,
            "num_classes": model.config.num_classes,
        },
        "snipped": model.snipped,
        "classifier_variant": model.classifier_variant,
        "layers": [_layer_manifest(layer) for layer in model.layers],
    }
    if extra:
        manifest["extra"] = extra
    tensors = [(name, tensor.data) for name, tensor in model.parameters()]
    return write_container(path, manifest, tensors)


def load_model(path) -> ModelGraph:
    """
    Rebuild a model from a checkpoint and restore every parameter buffer and
    trainable flag.
    """
    manifest, arrays = read_container(path)
    try:
        cfg = ModelConfig(**manifest["model_config"])
    except (KeyError, TypeError) as e:
        raise CheckpointFormatError(f"checkpoint '{path}' has no usable model config: {e}")
    model = build_model(cfg, seed=0)
    if manifest.get("snipped"):
        model = snip_and_attach(model, manifest.get("classifier_variant") or "two-layer")
    params = dict(model.parameters())
    for name, tensor in params.items():
        if name not in arrays:
            raise CheckpointFormatError(f"checkpoint '{path}' lacks tensor '{name}'")
        if arrays[name].shape != tensor.shape:
            raise CheckpointFormatError(
                f"tensor '{name}' has shape {arrays[name].shape}, model expects {tensor.shape}"
            )
        tensor.data = np.array(arrays[name], dtype=np.float32)
    flags = {entry["name"]: entry["trainable"] for entry in manifest.get("layers", [])}
    for layer in model.layers:
        if layer.name in flags:
            layer.set_trainable(flags[layer.name])
    logger.info(f"Model loaded from {path}")
    return model
