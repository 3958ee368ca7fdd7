"""Tests for vitctl.models."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from vitctl.models import (
    AugmentationConfig,
    DatasetRef,
    ImageDataset,
    LinearExperimentConfig,
    ModelConfig,
    ParamCountBreakdown,
    Precision,
    Split,
    SweepGrid,
    SweepRecord,
    SyntheticContextConfig,
    TheoryParams,
    TrainConfig,
)


class TestPrecision:
    def test_dtype(self):
        assert Precision.FLOAT32.dtype == np.float32
        assert Precision("float64").dtype == np.float64


class TestModelConfig:
    def test_defaults(self):
        config = ModelConfig()
        assert config.tokens == 256
        assert config.patch_dim == 4

    def test_patch_must_divide_image(self):
        with pytest.raises(ValidationError, match="does not divide"):
            ModelConfig(image_size=10, patch_size=3)

    def test_frozen(self):
        with pytest.raises(ValidationError):
            ModelConfig().heads = 4  # type: ignore[misc]

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            ModelConfig(depth=3)  # type: ignore[call-arg]

    def test_with_grid_point(self):
        config = ModelConfig().with_grid_point(4, 8)
        assert (config.heads, config.encoders) == (4, 8)
        assert config.d_model == 64

    def test_rgb_patch_dim(self):
        assert ModelConfig(image_size=224, patch_size=16, channels=3).patch_dim == 768


class TestParamCountBreakdown:
    def test_total_checked(self):
        with pytest.raises(ValidationError, match="sum of parts"):
            ParamCountBreakdown(
                embedding=1, positional=1, attention_per_encoder=1, ffn_per_encoder=1,
                norm_per_encoder=1, classifier=1, encoders=2, total=5,
            )

    def test_per_encoder(self):
        b = ParamCountBreakdown(
            embedding=1, positional=2, attention_per_encoder=3, ffn_per_encoder=4,
            norm_per_encoder=5, classifier=6, encoders=2, total=33,
        )
        assert b.per_encoder == 12


class TestTheoryParams:
    def test_noise_variance_positive(self):
        with pytest.raises(ValidationError):
            TheoryParams(noise_variance=0.0)

    def test_c_non_negative(self):
        assert TheoryParams(c=0.0).c == 0.0
        with pytest.raises(ValidationError):
            TheoryParams(c=-1.0)


class TestAugmentationConfig:
    def test_defaults(self):
        aug = AugmentationConfig()
        assert aug.translation_factor == (0.1, 0.1)
        assert aug.rotation_factor == 0.2
        assert aug.crop_fraction == 0.8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"translation_factor": (1.0, 0.0)},
            {"rotation_factor": -0.1},
            {"crop_fraction": 0.0},
            {"crop_fraction": 1.5},
        ],
    )
    def test_ranges(self, kwargs):
        with pytest.raises(ValidationError):
            AugmentationConfig(**kwargs)


class TestSyntheticContextConfig:
    def test_contextual_needs_room_for_two_glyphs(self):
        SyntheticContextConfig(image_size=8, glyph_size=4, contextual=True)
        with pytest.raises(ValidationError, match="glyph placement"):
            SyntheticContextConfig(image_size=7, glyph_size=4, contextual=True)


class TestImageDataset:
    def _dataset(self, n=4):
        images = np.arange(n * 4, dtype=np.uint8).reshape(n, 1, 2, 2)
        return ImageDataset(images=images, labels=np.arange(n) % 2, class_count=2)

    def test_geometry(self):
        ds = self._dataset()
        assert len(ds) == 4
        assert ds.image_size == 2
        assert ds.channels == 1
        assert ds.split == Split.TRAIN

    def test_as_float_scales_uint8(self):
        ds = ImageDataset(
            images=np.full((1, 1, 2, 2), 255, dtype=np.uint8), labels=np.array([0]),
            class_count=2,
        )
        assert np.all(ds.as_float() == 1.0)

    def test_head_and_take(self):
        ds = self._dataset()
        assert len(ds.head(10)) == 4
        assert ds.take(np.array([3, 1])).labels.tolist() == [1, 1]

    def test_label_range(self):
        with pytest.raises(ValidationError, match="labels"):
            ImageDataset(images=np.zeros((1, 1, 2, 2)), labels=np.array([2]), class_count=2)

    def test_count_mismatch(self):
        with pytest.raises(ValidationError, match="labels"):
            ImageDataset(images=np.zeros((2, 1, 2, 2)), labels=np.array([0]), class_count=2)

    def test_rank_checked(self):
        with pytest.raises(ValidationError, match="B x C x s x s"):
            ImageDataset(images=np.zeros((2, 2, 2)), labels=np.array([0, 1]), class_count=2)


class TestSweepGrid:
    def test_defaults(self):
        grid = SweepGrid()
        assert grid.heads == [1, 2, 4]
        assert grid.base.d_model == 16
        assert grid.dataset == DatasetRef()

    @pytest.mark.parametrize("heads", [[], [2, 1], [1, 1]])
    def test_axis_must_ascend(self, heads):
        with pytest.raises(ValidationError):
            SweepGrid(heads=heads)


class TestUnknownKeys:
    @pytest.mark.parametrize(
        ("model", "kwargs"),
        [
            (TrainConfig, {"epoch": 3}),
            (SweepGrid, {"encoder": [1, 2]}),
            (DatasetRef, {"datadir": "mnist"}),
            (AugmentationConfig, {"rotation": 0.1}),
            (SyntheticContextConfig, {"glyphs": 3}),
            (LinearExperimentConfig, {"p": 4, "k_train": 8, "trails": 5}),
        ],
    )
    def test_rejected(self, model, kwargs):
        with pytest.raises(ValidationError, match="Extra inputs"):
            model(**kwargs)

    def test_nested_typo_rejected(self):
        with pytest.raises(ValidationError):
            SweepGrid(train={"epochs": 1, "batchsize": 8})


class TestSweepRecord:
    def test_ok_and_gap(self):
        r = SweepRecord(heads=1, encoders=1, params=3, m=1, k=1, q=1 / 3, seed=0,
                        train_loss=0.25, test_loss=0.75)
        assert r.ok
        assert r.generalization_gap == 0.5
        assert r.q_exact == Fraction(1, 3)

    def test_failed(self):
        r = SweepRecord(heads=1, encoders=1, params=3, m=1, k=1, q=1 / 3, seed=0, error="boom")
        assert not r.ok
        assert r.generalization_gap is None
