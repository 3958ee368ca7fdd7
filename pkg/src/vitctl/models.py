"""Pydantic v2 models and enums for vitctl."""

from __future__ import annotations

import sys
from fractions import Fraction

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport for Python 3.10."""


import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Training protocol defaults
DEFAULT_EPOCHS = 100
DEFAULT_BATCH_SIZE = 256
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_WEIGHT_DECAY = 1e-4

# Desk-scale sweep defaults
DESK_TRAIN_LIMIT = 5_000
DESK_TEST_LIMIT = 1_000
DESK_DIMS = 16
DESK_EPOCHS = 5

DEFAULT_K_TEST = 10_000


class Precision(StrEnum):
    """Floating-point width of tensors."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.value)


class Split(StrEnum):
    """Dataset split tag."""

    TRAIN = "train"
    TEST = "test"


class DatasetKind(StrEnum):
    """Datasets the loader can materialize."""

    MNIST = "mnist"
    SYNTHETIC = "synthetic"


class SectionAxis(StrEnum):
    """Which grid axis a cross-section holds fixed."""

    HEADS = "heads"
    ENCODERS = "encoders"


class Regime(StrEnum):
    """Determination regime of a configuration."""

    UNDERDETERMINED = "underdetermined"
    MARGINAL = "marginal"
    OVERDETERMINED = "overdetermined"


# --- Model architecture ---


class ModelConfig(BaseModel):
    """Hyperparameters of an encoder-only Vision Transformer."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    image_size: int = Field(32, ge=1)
    patch_size: int = Field(2, ge=1)
    channels: int = Field(1, ge=1)
    d_model: int = Field(64, ge=1)
    d_key: int = Field(64, ge=1)
    d_value: int = Field(64, ge=1)
    d_ff: int = Field(64, ge=1)
    heads: int = Field(1, ge=1)
    encoders: int = Field(1, ge=1)
    classes: int = Field(10, ge=2)
    use_bias: bool = True

    @model_validator(mode="after")
    def _patch_divides_image(self) -> ModelConfig:
        if self.image_size % self.patch_size:
            raise ValueError(
                f"patch_size {self.patch_size} does not divide image_size {self.image_size}"
            )
        return self

    @property
    def tokens(self) -> int:
        """Token count N = (s/p)^2."""
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        """Length p^2 * C of a flattened patch."""
        return self.patch_size * self.patch_size * self.channels

    def with_grid_point(self, heads: int, encoders: int) -> ModelConfig:
        return self.model_copy(update={"heads": heads, "encoders": encoders})


class ParamCountBreakdown(BaseModel):
    """Closed-form parameter tallies of a ModelConfig."""

    embedding: int = Field(ge=0)
    positional: int = Field(ge=0)
    attention_per_encoder: int = Field(ge=0)
    ffn_per_encoder: int = Field(ge=0)
    norm_per_encoder: int = Field(ge=0)
    classifier: int = Field(ge=0)
    encoders: int = Field(ge=1)
    total: int = Field(ge=0)

    @model_validator(mode="after")
    def _total_is_consistent(self) -> ParamCountBreakdown:
        expected = (
            self.embedding + self.positional + self.encoders * self.per_encoder + self.classifier
        )
        if self.total != expected:
            raise ValueError(f"total {self.total} != sum of parts {expected}")
        return self

    @property
    def per_encoder(self) -> int:
        return self.attention_per_encoder + self.ffn_per_encoder + self.norm_per_encoder


# --- Capacity ---


class DeterminationInputs(BaseModel):
    """Constraint and parameter counts entering Q = MK/P."""

    m: int = Field(ge=1, description="Output count (classes)")
    k: int = Field(ge=1, description="Training-sample count")
    p: int = Field(ge=0, description="Parameter count")


class TheoryParams(BaseModel):
    """Noise variance and lumped constant of the test-error law."""

    noise_variance: float = Field(1.0, gt=0)
    c: float = Field(1.0, ge=0)


class CurvePoint(BaseModel):
    """One point of the analytic train/test error curves."""

    q: float
    train_mse: float
    test_mse: float

    @property
    def gap(self) -> float:
        return self.test_mse - self.train_mse


class PlanRow(BaseModel):
    """Parameter count and determination ratio of one grid point."""

    heads: int
    encoders: int
    params: int
    q: float
    regime: Regime


class DatasetPreset(BaseModel):
    """Geometry, size and grid of one benchmark experiment."""

    name: str
    config: ModelConfig
    train_size: int
    heads: list[int]
    encoders: list[int]


# --- Linear oracle ---


class LinearExperimentConfig(BaseModel):
    """Monte Carlo least-squares experiment.

    ``p`` is the total parameter count of the fitted linear map; the design matrix
    has ``p // m`` columns, one weight column per output.
    """

    model_config = ConfigDict(extra="forbid")

    p: int = Field(ge=1)
    m: int = Field(1, ge=1)
    k_train: int = Field(ge=1)
    k_test: int = Field(DEFAULT_K_TEST, ge=1)
    sigma: float = Field(1.0, ge=0)
    trials: int = Field(200, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _outputs_divide_params(self) -> LinearExperimentConfig:
        if self.p % self.m:
            raise ValueError(f"output count m={self.m} does not divide p={self.p}")
        return self

    @property
    def features(self) -> int:
        return self.p // self.m

    @property
    def underdetermined(self) -> bool:
        return self.k_train * self.m < self.p


class TrialOutcome(BaseModel):
    """Train and test MSE of a single least-squares fit."""

    train_mse: float = Field(ge=0)
    test_mse: float = Field(ge=0)
    rank_deficient: bool = False


class LinearExperimentResult(BaseModel):
    """Aggregated outcome of a linear-oracle experiment."""

    config: LinearExperimentConfig
    train_mses: list[float]
    test_mses: list[float]
    train_mean: float
    train_std: float
    train_stderr: float
    test_mean: float
    test_std: float
    test_stderr: float
    rank_deficient_trials: int = 0
    predicted_train_mse: float
    noise_floor: float
    expected_test_mse: float | None = None


class OracleRow(BaseModel):
    """One K of a linear-oracle sweep."""

    k: int
    q: float
    train_mse: float
    test_mse: float
    train_stderr: float
    test_stderr: float
    predicted_train_mse: float
    noise_floor: float
    expected_test_mse: float | None = None

    @property
    def gap(self) -> float:
        return self.test_mse - self.train_mse


# --- Data ---


class AugmentationConfig(BaseModel):
    """Random translation, rotation and crop applied to training batches."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    translation_factor: tuple[float, float] = (0.1, 0.1)
    rotation_factor: float = 0.2
    crop_fraction: float = 0.8

    @field_validator("translation_factor")
    @classmethod
    def _translation_in_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if any(not 0 <= f < 1 for f in v):
            raise ValueError(f"translation factors must lie in [0, 1), got {v}")
        return v

    @field_validator("rotation_factor")
    @classmethod
    def _rotation_in_range(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError(f"rotation factor must lie in [0, 1), got {v}")
        return v

    @field_validator("crop_fraction")
    @classmethod
    def _crop_in_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"crop fraction must lie in (0, 1], got {v}")
        return v


class SyntheticContextConfig(BaseModel):
    """Glyph-stamping dataset whose label may depend on two patches jointly."""

    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(16, ge=2)
    glyph_size: int = Field(4, ge=1)
    class_count: int = Field(2, ge=2)
    contextual: bool = False
    train_samples: int = Field(1_000, ge=1)
    test_samples: int = Field(200, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _glyphs_fit(self) -> SyntheticContextConfig:
        needed = 2 * self.glyph_size if self.contextual else self.glyph_size
        if needed > self.image_size:
            raise ValueError(
                f"glyph placement needs {needed} pixels but image_size is {self.image_size}"
            )
        return self


class ImageDataset(BaseModel):
    """Images (B x C x s x s, uint8) with integer labels."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    images: np.ndarray
    labels: np.ndarray
    class_count: int = Field(ge=2)
    split: Split = Split.TRAIN
    annotations: np.ndarray | None = None

    @model_validator(mode="after")
    def _consistent(self) -> ImageDataset:
        if self.images.ndim != 4:
            raise ValueError(f"images must be B x C x s x s, got shape {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        return self

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_size(self) -> int:
        return int(self.images.shape[-1])

    @property
    def channels(self) -> int:
        return int(self.images.shape[1])

    def as_float(self, dtype: np.dtype | str = "float32") -> np.ndarray:
        """Intensities scaled to [0, 1]."""
        if self.images.dtype == np.uint8:
            return self.images.astype(dtype) / np.asarray(255, dtype=dtype)
        return self.images.astype(dtype)

    def take(self, indices: np.ndarray) -> ImageDataset:
        annotations = None if self.annotations is None else self.annotations[indices]
        return self.model_copy(
            update={
                "images": self.images[indices],
                "labels": self.labels[indices],
                "annotations": annotations,
            }
        )

    def head(self, n: int) -> ImageDataset:
        """First ``n`` samples (all when n exceeds the size)."""
        return self.take(np.arange(min(n, len(self))))


class DatasetRef(BaseModel):
    """Where a run's train/test data comes from."""

    model_config = ConfigDict(extra="forbid")

    kind: DatasetKind = DatasetKind.MNIST
    data_dir: str | None = None
    image_size: int = Field(32, ge=1)
    train_limit: int | None = Field(DESK_TRAIN_LIMIT, ge=1)
    test_limit: int | None = Field(DESK_TEST_LIMIT, ge=1)
    synthetic: SyntheticContextConfig = Field(default_factory=SyntheticContextConfig)


# --- Training ---


class TrainConfig(BaseModel):
    """AdamW training protocol."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(DEFAULT_EPOCHS, ge=0)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0)
    seed: int = 0
    precision: Precision = Precision.FLOAT32
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    decay_exclude: list[str] = Field(default_factory=list)


class EpochMetrics(BaseModel):
    """End-of-epoch losses."""

    epoch: int = Field(ge=0)
    train_loss: float = Field(ge=0)
    test_loss: float = Field(ge=0)
    seconds: float = Field(0.0, ge=0)


# --- Sweeps ---


def _ascending_distinct(values: list[int], name: str) -> list[int]:
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly ascending, got {values}")
    if values[0] < 1:
        raise ValueError(f"{name} must be positive, got {values}")
    return values


class SweepGrid(BaseModel):
    """(heads, encoders) grid trained under one protocol."""

    model_config = ConfigDict(extra="forbid")

    name: str = "sweep"
    heads: list[int] = Field(default_factory=lambda: [1, 2, 4])
    encoders: list[int] = Field(default_factory=lambda: [1, 2, 4])
    base: ModelConfig = Field(
        default_factory=lambda: ModelConfig(
            d_model=DESK_DIMS, d_key=DESK_DIMS, d_value=DESK_DIMS, d_ff=DESK_DIMS
        )
    )
    train: TrainConfig = Field(default_factory=lambda: TrainConfig(epochs=DESK_EPOCHS))
    dataset: DatasetRef = Field(default_factory=DatasetRef)
    output_dir: str = "sweep-out"
    seed: int = 0
    workers: int = Field(1, ge=1)

    @field_validator("heads")
    @classmethod
    def _heads_valid(cls, v: list[int]) -> list[int]:
        return _ascending_distinct(v, "heads")

    @field_validator("encoders")
    @classmethod
    def _encoders_valid(cls, v: list[int]) -> list[int]:
        return _ascending_distinct(v, "encoders")


class SweepRecord(BaseModel):
    """Outcome of training one grid point."""

    heads: int
    encoders: int
    params: int = Field(ge=1)
    m: int = Field(ge=1)
    k: int = Field(ge=1)
    q: float
    seed: int
    train_loss: float | None = None
    test_loss: float | None = None
    first_train_loss: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.train_loss is not None and self.test_loss is not None

    @property
    def q_exact(self) -> Fraction:
        return Fraction(self.m * self.k, self.params)

    @property
    def generalization_gap(self) -> float | None:
        if not self.ok:
            return None
        return self.test_loss - self.train_loss  # type: ignore[operator]


class CrossSection(BaseModel):
    """Records sharing one fixed grid coordinate, Q-ascending."""

    axis: SectionAxis
    fixed: int
    records: list[SweepRecord] = Field(default_factory=list)


class TrendCheck(BaseModel):
    """Non-fatal expectation evaluated on sweep output; ``passed`` is None when skipped."""

    name: str
    passed: bool | None
    detail: str
