"""Q planning over (heads, encoders) grids for the benchmark geometries."""

from __future__ import annotations

from collections.abc import Sequence

from vitctl.capacity.ratio import classify, q_ratio
from vitctl.exceptions import ConfigError
from vitctl.models import DatasetPreset, ModelConfig, PlanRow
from vitctl.vit.counting import count_params

_SMALL_GRID = [1, 2, 4, 8]
_WIDE_GRID = [1, 2, 4, 8, 16, 32]


def _dims(width: int) -> dict[str, int]:
    return {"d_model": width, "d_key": width, "d_value": width, "d_ff": width}


PRESETS: dict[str, DatasetPreset] = {
    "mnist": DatasetPreset(
        name="mnist",
        config=ModelConfig(image_size=32, patch_size=2, channels=1, classes=10, **_dims(64)),
        train_size=60_000,
        heads=_SMALL_GRID,
        encoders=_SMALL_GRID,
    ),
    "cifar100": DatasetPreset(
        name="cifar100",
        config=ModelConfig(image_size=64, patch_size=8, channels=3, classes=100, **_dims(128)),
        train_size=50_000,
        heads=_WIDE_GRID,
        encoders=_WIDE_GRID,
    ),
    "birds": DatasetPreset(
        name="birds",
        config=ModelConfig(image_size=128, patch_size=8, channels=3, classes=200, **_dims(32)),
        train_size=5_994,
        heads=_SMALL_GRID,
        encoders=_SMALL_GRID,
    ),
    "places365": DatasetPreset(
        name="places365",
        config=ModelConfig(image_size=128, patch_size=16, channels=3, classes=365, **_dims(32)),
        train_size=1_803_460,
        heads=_WIDE_GRID,
        encoders=_WIDE_GRID,
    ),
    "imagenet": DatasetPreset(
        name="imagenet",
        config=ModelConfig(image_size=128, patch_size=16, channels=3, classes=1000, **_dims(64)),
        train_size=1_281_167,
        heads=_SMALL_GRID,
        encoders=_SMALL_GRID,
    ),
}


def get_preset(name: str) -> DatasetPreset:
    preset = PRESETS.get(name)
    if preset is None:
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(sorted(PRESETS))}")
    return preset


def plan_grid(
    base: ModelConfig,
    heads: Sequence[int],
    encoders: Sequence[int],
    k: int,
    m: int | None = None,
) -> list[PlanRow]:
    """P, Q and determination regime for every grid point, ordered by (t, h)."""
    classes = base.classes if m is None else m
    rows = []
    for t in encoders:
        for h in heads:
            params = count_params(base.with_grid_point(h, t)).total
            q = q_ratio(classes, k, params)
            rows.append(PlanRow(heads=h, encoders=t, params=params, q=float(q), regime=classify(q)))
    return rows


def plan_preset(name: str) -> list[PlanRow]:
    preset = get_preset(name)
    return plan_grid(preset.config, preset.heads, preset.encoders, preset.train_size)
