"""Training-time augmentation: random translation, rotation and crop.

Order per image: translate by up to ``translation_factor`` of each side, rotate by an
angle uniform in ``±rotation_factor`` of a full turn (both as one affine resample,
exposed pixels filled with 0), then crop a square of ``crop_fraction`` of the side at
a uniform random offset and resize it back. Labels are never touched.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from vitctl.data.transforms import resize
from vitctl.exceptions import DatasetError
from vitctl.models import AugmentationConfig


def _affine(image: np.ndarray, shift: tuple[float, float], angle: float) -> np.ndarray:
    if shift == (0.0, 0.0) and angle == 0.0:
        return image.copy()
    s = image.shape[-1]
    centre = np.full(2, (s - 1) / 2.0)
    cos, sin = math.cos(angle), math.sin(angle)
    # maps output (row, col) back to input coordinates
    inverse = np.array([[cos, sin], [-sin, cos]])
    offset = centre - inverse @ (centre + np.asarray(shift))
    return np.stack(
        [
            ndimage.affine_transform(
                channel, inverse, offset=offset, order=1, mode="constant", cval=0.0
            )
            for channel in image
        ]
    )


def augment(image: np.ndarray, cfg: AugmentationConfig, rng: np.random.Generator) -> np.ndarray:
    """Augment one C x s x s float image in [0, 1]; the output has the same shape."""
    if image.ndim != 3 or image.shape[1] != image.shape[2]:
        raise DatasetError(f"expected a square C x s x s image, got shape {image.shape}")
    if not cfg.enabled:
        return image.copy()
    s = image.shape[-1]
    fy, fx = cfg.translation_factor
    shift = (float(rng.uniform(-fy, fy) * s), float(rng.uniform(-fx, fx) * s))
    angle = float(rng.uniform(-cfg.rotation_factor, cfg.rotation_factor) * 2.0 * math.pi)
    out = _affine(image, shift, angle)

    side = max(1, int(round(cfg.crop_fraction * s)))
    top = int(rng.integers(0, s - side + 1))
    left = int(rng.integers(0, s - side + 1))
    if side != s:
        out = resize(out[:, top : top + side, left : left + side], s)
    return np.clip(out, 0.0, 1.0).astype(image.dtype, copy=False)


def batch_rng(seed: int, epoch: int, batch_index: int) -> np.random.Generator:
    """Stream keyed on (seed, epoch, batch) so batches can be augmented in any order."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, batch_index]))


def augment_batch(
    images: np.ndarray,
    cfg: AugmentationConfig,
    *,
    seed: int,
    epoch: int,
    batch_index: int,
) -> np.ndarray:
    if not cfg.enabled or len(images) == 0:
        return images.copy()
    rng = batch_rng(seed, epoch, batch_index)
    return np.stack([augment(img, cfg, rng) for img in images])
