"""
Two-phase training loop.

Pretraining draws two augmented views per image, runs encoder and projection
head, applies NT-Xent and updates trainable parameters with ADAM. The encoder
is frozen for the first ``freeze_epochs`` epochs. Fine-tuning trains the
snipped model with softmax cross-entropy and reports Top-1 accuracy.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..config import AugmentConfig, TrainConfig
from ..contrastive import ContrastiveBatch, augment_pair, nt_xent
from ..errors import DatasetEmptyError, HeadAlreadySnippedError, LabelOutOfRangeError, MissingClassifierError
from ..imaging import resize_bilinear
from ..monitoring import RunRecorder
from ..nn import softmax_cross_entropy
from ..tensor import Graph, Tensor, backward, no_grad
from ..dataset import Dataset
from .model import ModelGraph
from .optim import AdamState, adam_step, lr_at

logger = logging.getLogger(__name__)


@dataclass
class PretrainResult:
    model: ModelGraph
    losses: List[float] = field(default_factory=list)
    steps: int = 0


@dataclass
class FinetuneResult:
    model: ModelGraph
    losses: List[float] = field(default_factory=list)
    train_top1: List[float] = field(default_factory=list)
    val_top1: List[float] = field(default_factory=list)
    steps: int = 0


def batches(n: int, batch_size: int, seed: int, epoch: int, stream: int = 0) -> List[np.ndarray]:
    """Seeded shuffled index batches for one epoch; the last batch may be short."""
    order = np.random.default_rng([seed, epoch, stream]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def make_views(images: np.ndarray, indices: Sequence[int], cfg: AugmentConfig,
               epoch: int, workers: int = 1) -> np.ndarray:
    """
    Augmented views of the selected images, rows 2k and 2k+1 for image k.

    Each image uses its own generator stream, so the result does not depend
    on the number of workers.
    """
    def _pair(index: int) -> np.ndarray:
        return augment_pair(images[index], cfg, epoch, int(index))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            pairs = list(executor.map(_pair, indices))
    else:
        pairs = [_pair(i) for i in indices]
    return np.concatenate(pairs, axis=0)


def _apply_update(model: ModelGraph, state: AdamState, lr: float) -> None:
    params = model.trainable_parameters()
    adam_step(state, params, [tensor.grad for _, tensor in params], lr)
    model.zero_grad()


def contrastive_step(model: ModelGraph, views: np.ndarray, tau: float,
                     state: AdamState, lr: float) -> float:
    """One pretraining iteration: forward, NT-Xent, backward, ADAM update."""
    with Graph() as graph:
        z = model.project(model.encode(Tensor(views)))
        loss = nt_xent(ContrastiveBatch(z, tau))
        backward(loss)
    _apply_update(model, state, lr)
    graph.release()
    return loss.item()


def supervised_step(model: ModelGraph, images: np.ndarray, labels: np.ndarray,
                    state: AdamState, lr: float) -> float:
    """One fine-tuning iteration with softmax cross-entropy."""
    with Graph() as graph:
        loss = softmax_cross_entropy(model.classify(Tensor(images)), labels)
        backward(loss)
    _apply_update(model, state, lr)
    graph.release()
    return loss.item()


def pretrain(model: ModelGraph, data: Dataset, train_cfg: TrainConfig, augment_cfg: AugmentConfig,
             recorder: Optional[RunRecorder] = None, workers: int = 1,
             progress: bool = False) -> PretrainResult:
    """
    Contrastive pretraining with encoder freezing.

    For epochs below ``freeze_epochs`` the encoder is not trainable and its
    buffers are left untouched; afterwards the whole model trains.

    Raises:
        DatasetEmptyError: no images
        HeadAlreadySnippedError: the model has lost its projection head
    """
    if len(data) == 0:
        raise DatasetEmptyError("pretraining needs at least one image")
    if model.snipped or model.classifier:
        raise HeadAlreadySnippedError("pretraining needs the full projection head")
    images = data.images()
    for layer in model.projection:
        layer.set_trainable(True)
    state = AdamState.from_config(train_cfg)
    result = PretrainResult(model)

    for epoch in tqdm(range(train_cfg.epochs), desc="pretrain", disable=not progress):
        encoder_trainable = epoch >= train_cfg.freeze_epochs
        model.set_encoder_trainable(encoder_trainable)
        if epoch == train_cfg.freeze_epochs and epoch > 0:
            logger.info(f"Encoder unfrozen at epoch {epoch + 1}")
        if recorder:
            recorder.start_epoch()
        losses = []
        lr = lr_at(train_cfg, result.steps)
        for index_batch in batches(len(data), train_cfg.batch_size, train_cfg.seed, epoch):
            views = make_views(images, index_batch, augment_cfg, epoch, workers)
            lr = lr_at(train_cfg, result.steps)
            losses.append(contrastive_step(model, views, train_cfg.tau, state, lr))
            result.steps += 1
        epoch_loss = float(np.mean(losses))
        result.losses.append(epoch_loss)
        if recorder:
            recorder.end_epoch("pretrain", epoch + 1, epoch_loss, lr=lr,
                               encoder_trainable=encoder_trainable)
        else:
            logger.debug(f"[pretrain] epoch {epoch + 1}: loss={epoch_loss:.5f}")
    return result


def prepare_inputs(data: Dataset, size: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Stack dataset images, bilinearly resized to ``size`` when given."""
    images = data.images()
    if size is None or tuple(images.shape[1:3]) == tuple(size):
        return images
    return np.stack([resize_bilinear(img, size[0], size[1]) for img in images])


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    for label in labels:
        if not 0 <= label < num_classes:
            raise LabelOutOfRangeError(int(label), num_classes)


def predict(model: ModelGraph, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Argmax class per image; ties go to the lowest class index."""
    predictions = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            logits = model.classify(Tensor(images[start:start + batch_size]))
            predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions)


def evaluate_top1(model: ModelGraph, data: Dataset, batch_size: int = 64,
                  input_size: Optional[Tuple[int, int]] = None) -> float:
    """
    Fraction of samples whose highest logit is the true label.

    Raises:
        DatasetEmptyError: no samples
        MissingClassifierError: no classifier attached
    """
    if len(data) == 0:
        raise DatasetEmptyError("Top-1 evaluation needs at least one sample")
    if not model.classifier:
        raise MissingClassifierError("model has no classifier head")
    predictions = predict(model, prepare_inputs(data, input_size), batch_size)
    return float(np.mean(predictions == data.labels))


def finetune(model: ModelGraph, train: Dataset, train_cfg: TrainConfig,
             validation: Optional[Dataset] = None, input_size: Optional[Tuple[int, int]] = None,
             recorder: Optional[RunRecorder] = None, progress: bool = False) -> FinetuneResult:
    """
    Supervised fine-tuning of every parameter with softmax cross-entropy.

    Reports per-epoch training loss, training Top-1 and (when a validation set
    is given) validation Top-1.

    Raises:
        MissingClassifierError: model not snipped yet
        LabelOutOfRangeError: a label outside 0..num_classes-1
        DatasetEmptyError: no training samples
    """
    if not model.classifier:
        raise MissingClassifierError("fine-tuning needs a classifier head")
    if len(train) == 0:
        raise DatasetEmptyError("fine-tuning needs at least one sample")
    num_classes = model.config.num_classes
    labels = train.labels
    _check_labels(labels, num_classes)
    if validation is not None and len(validation):
        _check_labels(validation.labels, num_classes)
    images = prepare_inputs(train, input_size)
    val_images = prepare_inputs(validation, input_size) if validation is not None and len(validation) else None

    model.set_all_trainable(True)
    state = AdamState.from_config(train_cfg)
    result = FinetuneResult(model)
    lr0 = train_cfg.effective_finetune_lr0

    for epoch in tqdm(range(train_cfg.finetune_epochs), desc="finetune", disable=not progress):
        if recorder:
            recorder.start_epoch()
        losses = []
        lr = lr_at(train_cfg, result.steps, lr0)
        for index_batch in batches(len(train), train_cfg.batch_size, train_cfg.seed, epoch, stream=1):
            lr = lr_at(train_cfg, result.steps, lr0)
            losses.append(supervised_step(model, images[index_batch], labels[index_batch], state, lr))
            result.steps += 1
        epoch_loss = float(np.mean(losses))
        train_top1 = float(np.mean(predict(model, images) == labels))
        val_top1 = None
        if val_images is not None:
            val_top1 = float(np.mean(predict(model, val_images) == validation.labels))
            result.val_top1.append(val_top1)
        result.losses.append(epoch_loss)
        result.train_top1.append(train_top1)
        if recorder:
            recorder.end_epoch("finetune", epoch + 1, epoch_loss, lr=lr,
                               train_top1=train_top1, val_top1=val_top1)
        else:
            logger.debug(f"[finetune] epoch {epoch + 1}: loss={epoch_loss:.5f} top1={train_top1:.3f}")
    return result
