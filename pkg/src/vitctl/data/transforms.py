"""Geometric image transforms: bilinear resize and patch (dis)assembly.

Images are channel-first arrays (C x s x s, or B x C x s x s for batches).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from vitctl.exceptions import DatasetError


def _half_pixel_coords(source: int, target: int) -> np.ndarray:
    """Source-pixel coordinates of target pixel centres, clamped to the image."""
    coords = (np.arange(target, dtype=np.float64) + 0.5) * (source / target) - 0.5
    return np.clip(coords, 0.0, source - 1)


def resize(image: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resize of a C x s x s image (float, [0, 1]) to C x target x target."""
    if target < 1:
        raise DatasetError(f"target size must be positive, got {target}")
    if image.ndim != 3:
        raise DatasetError(f"expected a C x s x s image, got shape {image.shape}")
    source_h, source_w = image.shape[1:]
    if (source_h, source_w) == (target, target):
        return image.copy()
    rows = _half_pixel_coords(source_h, target)
    cols = _half_pixel_coords(source_w, target)
    grid = np.stack(np.meshgrid(rows, cols, indexing="ij"))
    out = np.stack(
        [ndimage.map_coordinates(channel, grid, order=1, mode="nearest") for channel in image]
    )
    return np.clip(out, 0.0, 1.0).astype(image.dtype, copy=False)


def resize_batch(images: np.ndarray, target: int) -> np.ndarray:
    """Resize every image of a B x C x s x s stack."""
    if images.shape[-1] == target and images.shape[-2] == target:
        return images.copy()
    return np.stack([resize(img, target) for img in images]) if len(images) else np.empty(
        (0, images.shape[1], target, target), dtype=images.dtype
    )


def _grid(shape: tuple[int, ...], p: int) -> int:
    s = shape[-1]
    if shape[-2] != s:
        raise DatasetError(f"images must be square, got {shape[-2]} x {s}")
    if p < 1 or s % p:
        raise DatasetError(f"patch size {p} does not divide image size {s}")
    return s // p


def extract_patches(image: np.ndarray, p: int) -> np.ndarray:
    """Split a C x s x s image into (s/p)^2 row-major patches, each flattened C x p x p."""
    if image.ndim != 3:
        raise DatasetError(f"expected a C x s x s image, got shape {image.shape}")
    return extract_patch_batch(image[None], p)[0]


def extract_patch_batch(images: np.ndarray, p: int) -> np.ndarray:
    """B x C x s x s -> B x N x (C p^2)."""
    if images.ndim != 4:
        raise DatasetError(f"expected B x C x s x s images, got shape {images.shape}")
    g = _grid(images.shape, p)
    b, c = images.shape[:2]
    blocks = images.reshape(b, c, g, p, g, p).transpose(0, 2, 4, 1, 3, 5)
    return blocks.reshape(b, g * g, c * p * p)


def assemble_patches(patches: np.ndarray, p: int, channels: int) -> np.ndarray:
    """Inverse of :func:`extract_patches`: N x (C p^2) -> C x s x s."""
    n, length = patches.shape
    g = int(round(n**0.5))
    if g * g != n or length != channels * p * p:
        raise DatasetError(
            f"{n} patches of length {length} do not tile a square {channels}-channel image"
        )
    blocks = patches.reshape(g, g, channels, p, p).transpose(2, 0, 3, 1, 4)
    return blocks.reshape(channels, g * p, g * p)
