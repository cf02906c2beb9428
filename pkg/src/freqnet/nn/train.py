"""Mini-batch training loop and evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from freqnet.data import DatasetSplit
from freqnet.metrics import EpochRecord, ResourceMonitor
from freqnet.nn.layers import DimensionError, softmax_cross_entropy
from freqnet.nn.model import Network
from freqnet.nn.optim import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    seed: int = 0
    deterministic: bool = True
    # stop once validation accuracy reaches this value
    target_accuracy: float | None = None

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


def loss_and_metrics(logits: np.ndarray, labels: np.ndarray, l2_penalty: float = 0.0) -> tuple[float, float]:
    """Mean cross-entropy plus the L2 term, and argmax accuracy."""
    xent, _ = softmax_cross_entropy(logits, labels)
    acc = float(np.mean(np.argmax(logits, axis=1) == labels)) if len(labels) else 0.0
    return xent + l2_penalty, acc


def evaluate(model: Network, split: DatasetSplit, batch_size: int = 256) -> tuple[float, float, np.ndarray]:
    """(loss, accuracy, predicted labels) in eval mode."""
    logits = np.concatenate([model.forward(split.images[i:i + batch_size], training=False)
                             for i in range(0, len(split), batch_size)])
    loss, acc = loss_and_metrics(logits.astype(np.float64), split.labels, model.l2_penalty())
    return loss, acc, np.argmax(logits, axis=1)


def _check_shapes(model: Network, split: DatasetSplit) -> None:
    expected = model.spec.input_shape
    if split.images.ndim != 4 or tuple(split.images.shape[1:]) != expected:
        raise DimensionError(f"dataset {split.name!r} images have shape {split.images.shape}, model expects (n, {', '.join(map(str, expected))})")
    if split.num_classes > model.spec.num_classes:
        raise DimensionError(f"dataset {split.name!r} has {split.num_classes} classes, model outputs {model.spec.num_classes}")


def train(model: Network, train_split: DatasetSplit, config: TrainConfig,
          val_split: DatasetSplit | None = None,
          monitor: ResourceMonitor | None = None) -> tuple[dict[str, np.ndarray], list[EpochRecord]]:
    """Train with Adam on shuffled mini-batches.

    Returns a snapshot of the final parameters and one record per epoch
    and split ('train', plus 'val' when a validation split is given).
    Training loss/accuracy are running means over the epoch's batches.
    """
    config.validate()
    if len(train_split) == 0:
        raise ValueError("training split is empty")
    _check_shapes(model, train_split)
    if val_split is not None:
        _check_shapes(model, val_split)

    monitor = monitor or ResourceMonitor()
    monitor.begin(model.params.count(), model.macs_per_sample(), model.transform_macs_per_sample())
    opt = Adam(config.lr, config.beta1, config.beta2, config.eps)
    n = len(train_split)
    step = 0
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        loss_sum = correct = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            model.set_step(step)
            loss, acc, _ = model.loss_and_grad(train_split.images[idx], train_split.labels[idx], training=True)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, step {step}")
            opt.step(model.params)
            loss_sum += loss * len(idx)
            correct += acc * len(idx)
            step += 1
        rec = monitor.on_epoch(epoch, "train", loss_sum / n, correct / n, n)
        log.info("epoch %d train loss %.4f acc %.4f", epoch, rec.loss, rec.accuracy)
        if val_split is not None:
            vloss, vacc, _ = evaluate(model, val_split)
            monitor.on_epoch(epoch, "val", vloss, vacc, len(val_split))
            log.info("epoch %d val loss %.4f acc %.4f", epoch, vloss, vacc)
            if config.target_accuracy is not None and vacc >= config.target_accuracy:
                break
    return model.params.snapshot(), monitor.finish()
