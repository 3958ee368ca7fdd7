"""Glyph-stamping datasets for probing whether a model uses context.

Each class owns one glyph: a fixed binary stamp with its own ink count. In plain mode
an image holds a single glyph and the label is its identity. In contextual mode the
image holds an ordered pair (left glyph a, right glyph b) and the label is
``(a + b) mod class_count``; for every label each glyph identity is equally likely,
so no single glyph carries information about the class.
"""

from __future__ import annotations

import logging

import numpy as np

from vitctl.exceptions import DatasetError
from vitctl.models import ImageDataset, Split, SyntheticContextConfig

logger = logging.getLogger(__name__)

INK = 255
_MAX_DRAWS_PER_SAMPLE = 1_000


def glyph_bank(cfg: SyntheticContextConfig) -> np.ndarray:
    """``class_count`` distinct g x g uint8 stamps with strictly increasing ink counts."""
    area = cfg.glyph_size * cfg.glyph_size
    if cfg.class_count > area:
        raise DatasetError(
            f"{cfg.class_count} glyph types need distinct ink counts, "
            f"but a {cfg.glyph_size}x{cfg.glyph_size} glyph has only {area} pixels"
        )
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC1]))
    glyphs = np.zeros((cfg.class_count, cfg.glyph_size, cfg.glyph_size), dtype=np.uint8)
    for i in range(cfg.class_count):
        ink = 1 + (i * (area - 1)) // max(1, cfg.class_count - 1)
        order = rng.permutation(area)[:ink]
        glyphs[i].flat[order] = INK
    return glyphs


def _stamp(canvas: np.ndarray, glyph: np.ndarray, row: int, col: int) -> None:
    g = glyph.shape[0]
    canvas[row : row + g, col : col + g] = glyph


def _draw(
    label: int, cfg: SyntheticContextConfig, glyphs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, list[int]]:
    s, g = cfg.image_size, cfg.glyph_size
    canvas = np.zeros((s, s), dtype=np.uint8)
    if not cfg.contextual:
        row, col = rng.integers(0, s - g + 1, size=2)
        _stamp(canvas, glyphs[label], int(row), int(col))
        return canvas, [label]

    a = int(rng.integers(0, cfg.class_count))
    b = (label - a) % cfg.class_count
    half = s // 2
    left = (int(rng.integers(0, s - g + 1)), int(rng.integers(0, half - g + 1)))
    right = (int(rng.integers(0, s - g + 1)), half + int(rng.integers(0, s - half - g + 1)))
    _stamp(canvas, glyphs[a], *left)
    _stamp(canvas, glyphs[b], *right)
    return canvas, [a, b]


def _generate(
    count: int,
    cfg: SyntheticContextConfig,
    glyphs: np.ndarray,
    stream: int,
    split: Split,
    exclude: set[bytes] | None = None,
) -> ImageDataset:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, stream]))
    labels = rng.permutation(np.arange(count) % cfg.class_count)
    images = np.empty((count, 1, cfg.image_size, cfg.image_size), dtype=np.uint8)
    annotations = np.empty((count, 2 if cfg.contextual else 1), dtype=np.int64)

    for i, label in enumerate(labels):
        for _ in range(_MAX_DRAWS_PER_SAMPLE):
            canvas, ids = _draw(int(label), cfg, glyphs, rng)
            if exclude is None or canvas.tobytes() not in exclude:
                break
        else:
            raise DatasetError(
                f"could not draw a {split.value} image disjoint from the training split; "
                "increase image_size or class_count"
            )
        images[i, 0] = canvas
        annotations[i] = ids

    return ImageDataset(
        images=images,
        labels=labels.astype(np.int64),
        class_count=cfg.class_count,
        split=split,
        annotations=annotations,
    )


def synth_context_dataset(cfg: SyntheticContextConfig) -> tuple[ImageDataset, ImageDataset]:
    """Deterministic (train, test) pair; no test image also appears in train."""
    glyphs = glyph_bank(cfg)
    train = _generate(cfg.train_samples, cfg, glyphs, stream=1, split=Split.TRAIN)
    seen = {img.tobytes() for img in train.images[:, 0]}
    test = _generate(cfg.test_samples, cfg, glyphs, stream=2, split=Split.TEST, exclude=seen)
    logger.info(
        "Generated %s glyph dataset: %d train / %d test, %d classes",
        "contextual" if cfg.contextual else "plain",
        len(train),
        len(test),
        cfg.class_count,
    )
    return train, test
