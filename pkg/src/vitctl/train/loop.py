"""Training loop and loss evaluation."""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path

import numpy as np

from vitctl.autodiff import ops
from vitctl.autodiff.tensor import Tape, backward, no_record
from vitctl.data.augment import augment_batch
from vitctl.exceptions import NonFiniteError, TrainingError
from vitctl.models import DEFAULT_BATCH_SIZE, EpochMetrics, ImageDataset, TrainConfig
from vitctl.sweep.datafile import format_value
from vitctl.train.optim import OptimizerState, adamw_step
from vitctl.vit.model import VisionTransformer, forward

logger = logging.getLogger(__name__)

METRICS_HEADER = "epoch loss val_loss"


def _check_geometry(model: VisionTransformer, dataset: ImageDataset) -> None:
    cfg = model.config
    if dataset.image_size != cfg.image_size or dataset.channels != cfg.channels:
        raise TrainingError(
            f"{dataset.split.value} images are {dataset.channels}x{dataset.image_size}x"
            f"{dataset.image_size}, model expects {cfg.channels}x{cfg.image_size}x{cfg.image_size}"
        )
    if dataset.class_count > cfg.classes:
        raise TrainingError(
            f"{dataset.split.value} set has {dataset.class_count} classes, "
            f"model outputs {cfg.classes}"
        )


def epoch_order(seed: int, epoch: int, size: int) -> np.ndarray:
    """Shuffled sample order of one epoch."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(size)


def evaluate(
    model: VisionTransformer, dataset: ImageDataset, batch_size: int = DEFAULT_BATCH_SIZE
) -> float:
    """Mean cross-entropy over every sample, without augmentation or recording."""
    if len(dataset) == 0:
        raise TrainingError(f"cannot evaluate on an empty {dataset.split.value} set")
    _check_geometry(model, dataset)
    images = dataset.as_float(model.precision.dtype)
    losses: list[float] = []
    with no_record():
        for start in range(0, len(dataset), batch_size):
            logits = forward(images[start : start + batch_size], model)
            batch = ops.per_sample_cross_entropy(
                logits.data.astype(np.float64), dataset.labels[start : start + batch_size]
            )
            losses.extend(batch.tolist())
    return math.fsum(losses) / len(losses)


def _append_metrics(path: Path, metrics: EpochMetrics) -> None:
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        if fresh:
            f.write(METRICS_HEADER + "\n")
        row = (metrics.epoch, format_value(metrics.train_loss), format_value(metrics.test_loss))
        f.write(" ".join(str(v) for v in row) + "\n")


def train(
    model: VisionTransformer,
    train_set: ImageDataset,
    test_set: ImageDataset,
    cfg: TrainConfig,
    metrics_log: str | Path | None = None,
) -> list[EpochMetrics]:
    """Optimize ``model`` in place; one EpochMetrics (1-based epoch) per epoch."""
    if cfg.precision != model.precision:
        raise TrainingError(
            f"model was built in {model.precision.value}, config asks for {cfg.precision.value}"
        )
    _check_geometry(model, train_set)
    _check_geometry(model, test_set)
    if len(train_set) == 0:
        raise TrainingError("training set is empty")

    log_path = Path(metrics_log) if metrics_log is not None else None
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)

    dtype = model.precision.dtype
    images = train_set.as_float(dtype)
    state = OptimizerState()
    params = model.parameters()
    history: list[EpochMetrics] = []

    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        order = epoch_order(cfg.seed, epoch, len(train_set))
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x = augment_batch(
                images[idx], cfg.augmentation, seed=cfg.seed, epoch=epoch, batch_index=batch_index
            ).astype(dtype, copy=False)
            try:
                with Tape():
                    loss = ops.cross_entropy(forward(x, model), train_set.labels[idx])
            except NonFiniteError as e:
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_index}: {e}"
                ) from e
            backward(loss)
            try:
                adamw_step(
                    params, state, cfg.learning_rate, cfg.weight_decay, cfg.decay_exclude
                )
            except (TrainingError, NonFiniteError) as e:
                raise TrainingError(
                    f"optimizer step failed at epoch {epoch + 1}, batch {batch_index}: {e}"
                ) from e
            model.zero_grad()
            logger.debug("epoch %d batch %d loss %.6f", epoch + 1, batch_index, loss.item())

        metrics = EpochMetrics(
            epoch=epoch + 1,
            train_loss=evaluate(model, train_set, cfg.batch_size),
            test_loss=evaluate(model, test_set, cfg.batch_size),
            seconds=time.perf_counter() - started,
        )
        history.append(metrics)
        if log_path is not None:
            _append_metrics(log_path, metrics)
        logger.info(
            "epoch %d/%d: loss %.4f val_loss %.4f (%.1fs)",
            metrics.epoch,
            cfg.epochs,
            metrics.train_loss,
            metrics.test_loss,
            metrics.seconds,
        )
    return history
