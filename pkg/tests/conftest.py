"""Shared test fixtures for vitctl."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from vitctl.models import ImageDataset, ModelConfig, Split, SyntheticContextConfig


@pytest.fixture(autouse=True)
def _isolate(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """Isolate each test: temp config dir, no MNIST directory unless a test sets one."""
    config_dir = tmp_path / ".vitctl"
    config_dir.mkdir()
    monkeypatch.setenv("VITCTL_DIR", str(config_dir))
    real_mnist = os.environ.get("VITCTL_DATA_DIR")
    if real_mnist:
        monkeypatch.setenv("VITCTL_REAL_MNIST", real_mnist)
    monkeypatch.delenv("VITCTL_DATA_DIR", raising=False)


@pytest.fixture
def tmp_config_dir(tmp_path: Path) -> Path:
    """Pre-created config directory."""
    d = tmp_path / ".vitctl"
    d.mkdir(exist_ok=True)
    return d


@pytest.fixture
def tiny_config() -> ModelConfig:
    """4x4 single-channel geometry from the counting examples (P = 182)."""
    return ModelConfig(
        image_size=4, patch_size=2, channels=1, d_model=4, d_key=4, d_value=4, d_ff=4,
        heads=1, encoders=1, classes=2,
    )


@pytest.fixture
def grad_config() -> ModelConfig:
    """Small multi-head, multi-encoder model for float64 gradient checks."""
    return ModelConfig(
        image_size=8, patch_size=4, channels=1, d_model=8, d_key=8, d_value=8, d_ff=8,
        heads=2, encoders=2, classes=3,
    )


@pytest.fixture
def glyph_config() -> SyntheticContextConfig:
    return SyntheticContextConfig(
        image_size=8, glyph_size=2, class_count=2, train_samples=64, test_samples=32, seed=3
    )


@pytest.fixture
def random_dataset() -> ImageDataset:
    """Twelve random 1x4x4 uint8 images with labels in {0, 1}."""
    rng = np.random.default_rng(0)
    return ImageDataset(
        images=rng.integers(0, 256, size=(12, 1, 4, 4), dtype=np.uint8),
        labels=np.arange(12) % 2,
        class_count=2,
        split=Split.TRAIN,
    )


@pytest.fixture
def real_mnist_dir() -> Path:
    """Directory holding the published MNIST IDX files, or skip."""
    from vitctl.data.loader import mnist_available

    directory = os.environ.get("VITCTL_REAL_MNIST")
    if not directory or not mnist_available(directory):
        pytest.skip("MNIST IDX files not available (set VITCTL_DATA_DIR)")
    return Path(directory)
