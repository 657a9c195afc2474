"""
Simplified dense-block convolutional encoder.

A 1x1 stem maps RGB to ``stem_channels``; each stage stacks 'same' k×k
convolutions whose outputs are concatenated onto their inputs along the
channel axis (dense connectivity), and ends with 2x2 average pooling. A final
global average pool yields one feature vector per image. Per-channel bias and
relu stand in for batch normalization.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..errors import ShapeMismatchError
from ..tensor import Tensor, concat, contract, extract_patches, mean, relu, reshape
from .layers import add_bias

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderConfig:
    """
    Encoder shape.

    Attributes:
        stages: (num_layers, growth_channels) per stage
        kernel: Odd convolution size
        stem_channels: Channels produced by the 1x1 stem
        in_channels: Image channels (3 for RGB)
    """

    stages: Tuple[Tuple[int, int], ...] = ((2, 8), (2, 16))
    kernel: int = 3
    stem_channels: int = 16
    in_channels: int = 3

    @property
    def feature_dim(self) -> int:
        return self.stem_channels + sum(n * g for n, g in self.stages)

    def stage_input_channels(self, stage: int) -> int:
        return self.stem_channels + sum(n * g for n, g in self.stages[:stage])

    def layer_input_channels(self, stage: int, layer: int) -> int:
        """Input channels of ``layer`` in ``stage``: stage input + growth·layer."""
        return self.stage_input_channels(stage) + self.stages[stage][1] * layer

    @property
    def downsampling(self) -> int:
        return 2 ** len(self.stages)


@dataclass
class ConvLayer:
    """'Same' convolution with per-channel bias followed by relu."""

    weight: Tensor  # (k, k, C_in, C_out)
    bias: Tensor
    trainable: bool = True
    name: str = "conv"
    kind: str = field(default="conv", init=False)

    def __post_init__(self):
        k1, k2, _, c_out = self.weight.shape
        if k1 != k2 or k1 % 2 == 0:
            raise ShapeMismatchError(f"{self.name}: kernel must be square and odd, got {self.weight.shape}")
        if self.bias.shape != (c_out,):
            raise ShapeMismatchError(f"{self.name}: bias shape {self.bias.shape} != ({c_out},)")
        self.set_trainable(self.trainable)

    @property
    def kernel(self) -> int:
        return self.weight.shape[0]

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        self.weight.requires_grad = trainable
        self.bias.requires_grad = trainable

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def param_count(self, include_bias: bool = True) -> int:
        return self.weight.size + (self.bias.size if include_bias else 0)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[3] != self.weight.shape[2]:
            raise ShapeMismatchError(
                f"{self.name}: input has {x.shape[3]} channels, kernel expects {self.weight.shape[2]}"
            )
        patches = extract_patches(x, self.kernel)                      # (B, H, W, k, k, C)
        y = contract(patches, self.weight, [(3, 0), (4, 1), (5, 2)])   # (B, H, W, C_out)
        return relu(add_bias(y, self.bias))


@dataclass
class DenseStage:
    """Densely connected convolutions followed by 2x2 average pooling."""

    convs: List[ConvLayer]
    trainable: bool = True
    name: str = "stage"
    kind: str = field(default="dense-stage", init=False)

    def __post_init__(self):
        self.set_trainable(self.trainable)

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        for conv in self.convs:
            conv.set_trainable(trainable)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [p for conv in self.convs for p in conv.parameters()]

    def param_count(self, include_bias: bool = True) -> int:
        return sum(conv.param_count(include_bias) for conv in self.convs)

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for conv in self.convs:
            h = concat([h, conv(h)], axis=3)
        return avg_pool2(h)


@dataclass
class Encoder:
    """Stem plus dense stages; maps (B, H, W, 3) images to (B, feature_dim)."""

    config: EncoderConfig
    stem: ConvLayer
    stages: List[DenseStage]

    @property
    def feature_dim(self) -> int:
        return self.config.feature_dim

    @property
    def layers(self) -> list:
        return [self.stem, *self.stages]

    def set_trainable(self, trainable: bool) -> None:
        for layer in self.layers:
            layer.set_trainable(trainable)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        return [p for layer in self.layers for p in layer.parameters()]

    def param_count(self, include_bias: bool = True) -> int:
        return sum(layer.param_count(include_bias) for layer in self.layers)

    def __call__(self, images: Tensor) -> Tensor:
        return encoder_forward(self, images)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2 over the spatial axes of an NHWC tensor."""
    batch, height, width, channels = x.shape
    if height % 2 or width % 2:
        raise ShapeMismatchError(f"cannot 2x2-pool spatial extent {height}x{width}")
    blocks = reshape(x, (batch, height // 2, 2, width // 2, 2, channels))
    return mean(mean(blocks, axis=4), axis=2)


def global_avg_pool(x: Tensor) -> Tensor:
    """Average over both spatial axes: (B, H, W, C) -> (B, C)."""
    return mean(mean(x, axis=1), axis=1)


def _conv_init(rng: np.random.Generator, kernel: int, c_in: int, c_out: int, name: str) -> ConvLayer:
    s = math.sqrt(6.0 / (kernel * kernel * c_in))
    weight = rng.uniform(-s, s, size=(kernel, kernel, c_in, c_out)).astype(np.float32)
    return ConvLayer(Tensor(weight, name=f"{name}.weight"),
                     Tensor(np.zeros(c_out), name=f"{name}.bias"), name=name)


def encoder_init(cfg: EncoderConfig, seed: int) -> Encoder:
    """He-uniform kernels and zero biases, drawn stem first then stage by stage."""
    rng = np.random.default_rng(seed)
    stem = _conv_init(rng, 1, cfg.in_channels, cfg.stem_channels, "encoder.stem")
    stages = []
    for s, (num_layers, growth) in enumerate(cfg.stages):
        convs = [
            _conv_init(rng, cfg.kernel, cfg.layer_input_channels(s, i), growth,
                       f"encoder.stage{s}.conv{i}")
            for i in range(num_layers)
        ]
        stages.append(DenseStage(convs, name=f"encoder.stage{s}"))
    logger.debug(f"Encoder initialized: feature_dim={cfg.feature_dim}, stages={cfg.stages}")
    return Encoder(cfg, stem, stages)


def encoder_forward(encoder: Encoder, images: Tensor) -> Tensor:
    """
    Encode a batch of NHWC images into flattened feature vectors.

    Raises:
        ShapeMismatchError: images are not (B, H, W, in_channels) or H, W are not
            divisible by 2 ** (number of stages)
    """
    cfg = encoder.config
    if images.ndim != 4 or images.shape[3] != cfg.in_channels:
        raise ShapeMismatchError(
            f"encoder expects (B, H, W, {cfg.in_channels}) images, got {images.shape}"
        )
    factor = cfg.downsampling
    if images.shape[1] % factor or images.shape[2] % factor:
        raise ShapeMismatchError(
            f"image size {images.shape[1]}x{images.shape[2]} not divisible by {factor}"
        )
    h = encoder.stem(images)
    for stage in encoder.stages:
        h = stage(h)
    return global_avg_pool(h)
