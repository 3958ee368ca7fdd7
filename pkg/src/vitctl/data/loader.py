"""Materialize the (train, test) pair a DatasetRef points at."""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from vitctl.data.idx import load_mnist_idx
from vitctl.data.synthetic import synth_context_dataset
from vitctl.data.transforms import resize_batch
from vitctl.exceptions import DatasetError
from vitctl.models import DatasetKind, DatasetRef, ImageDataset, Split

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "VITCTL_DATA_DIR"

MNIST_FILES = {
    Split.TRAIN: ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    Split.TEST: ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def resolve_data_dir(data_dir: str | None) -> Path:
    """Explicit directory, else ``$VITCTL_DATA_DIR``."""
    chosen = data_dir or os.environ.get(DATA_DIR_ENV)
    if not chosen:
        raise DatasetError(f"No MNIST directory given; pass data_dir or set {DATA_DIR_ENV}")
    return Path(chosen).expanduser()


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, f"{stem}.gz"):
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise DatasetError(f"{stem}[.gz] not found in {directory}")


def mnist_available(data_dir: str | None = None) -> bool:
    try:
        directory = resolve_data_dir(data_dir)
        for images, labels in MNIST_FILES.values():
            _find(directory, images)
            _find(directory, labels)
    except DatasetError:
        return False
    return True


def load_mnist_split(directory: Path, split: Split) -> ImageDataset:
    images, labels = MNIST_FILES[split]
    return load_mnist_idx(_find(directory, images), _find(directory, labels), split=split)


def _prepare(dataset: ImageDataset, image_size: int, limit: int | None) -> ImageDataset:
    if limit is not None:
        dataset = dataset.head(limit)
    if dataset.image_size != image_size:
        resized = resize_batch(dataset.as_float(np.float32), image_size)
        dataset = dataset.model_copy(update={"images": resized})
    return dataset


def load_dataset(ref: DatasetRef) -> tuple[ImageDataset, ImageDataset]:
    if ref.kind == DatasetKind.MNIST:
        directory = resolve_data_dir(ref.data_dir)
        train = load_mnist_split(directory, Split.TRAIN)
        test = load_mnist_split(directory, Split.TEST)
    else:
        train, test = synth_context_dataset(ref.synthetic)
    train = _prepare(train, ref.image_size, ref.train_limit)
    test = _prepare(test, ref.image_size, ref.test_limit)
    logger.info(
        "Dataset %s: %d train / %d test at %dx%d",
        ref.kind.value,
        len(train),
        len(test),
        ref.image_size,
        ref.image_size,
    )
    return train, test
