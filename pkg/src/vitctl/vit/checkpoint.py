"""Model checkpoints as versioned ``.npz`` archives.

Layout: one array per parameter, keyed by its dotted name, plus ``__meta__`` holding
a JSON document ``{"format": 1, "precision": ..., "config": {...}}``.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from vitctl.exceptions import CheckpointError
from vitctl.models import ModelConfig, Precision
from vitctl.vit.model import VisionTransformer, build

FORMAT_VERSION = 1
_META_KEY = "__meta__"


def save_checkpoint(model: VisionTransformer, path: str | Path) -> Path:
    dest = Path(path)
    meta = {
        "format": FORMAT_VERSION,
        "precision": model.precision.value,
        "config": model.config.model_dump(),
    }
    arrays = {p.name: p.value.numpy() for p in model.parameters()}
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "wb") as f:
            np.savez(f, **arrays)
    except OSError as e:
        raise CheckpointError(f"Could not write checkpoint {dest}: {e}") from e
    return dest


def load_checkpoint(path: str | Path) -> VisionTransformer:
    src = Path(path)
    if not src.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        with np.load(src, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"Unreadable checkpoint {path}: {e}") from e

    if _META_KEY not in arrays:
        raise CheckpointError(f"{path} has no metadata record")
    try:
        meta = json.loads(str(arrays.pop(_META_KEY)))
        if meta.get("format") != FORMAT_VERSION:
            raise CheckpointError(
                f"Unsupported checkpoint format {meta.get('format')} (expected {FORMAT_VERSION})"
            )
        config = ModelConfig(**meta["config"])
        precision = Precision(meta["precision"])
    except (json.JSONDecodeError, KeyError, ValueError, ValidationError) as e:
        raise CheckpointError(f"Corrupt checkpoint metadata in {path}: {e}") from e

    model = build(config, seed=0, precision=precision)
    params = model.named_parameters()
    if set(params) != set(arrays):
        missing = sorted(set(params) - set(arrays))
        extra = sorted(set(arrays) - set(params))
        raise CheckpointError(
            f"Checkpoint {path} does not match its config: "
            f"missing {missing}, unexpected {extra}"
        )
    for name, param in params.items():
        if arrays[name].shape != param.shape:
            raise CheckpointError(
                f"{name}: stored shape {arrays[name].shape} != expected {param.shape}"
            )
        param.assign(arrays[name])
    return model
