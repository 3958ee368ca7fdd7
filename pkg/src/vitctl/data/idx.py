"""IDX container reading and writing (the MNIST distribution format).

Header: two zero bytes, a type code (0x08 = unsigned byte), the dimension count,
then one big-endian uint32 per dimension, then the raw row-major payload.
Paths ending in ``.gz`` are (de)compressed transparently.
"""

from __future__ import annotations

import gzip
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from vitctl.exceptions import (
    DatasetError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
)
from vitctl.models import ImageDataset, Split

logger = logging.getLogger(__name__)

UBYTE = 0x08
IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def _read_bytes(path: str | Path) -> bytes:
    src = Path(path)
    if not src.exists():
        raise DatasetError(f"IDX file not found: {path}")
    try:
        with _open(src, "rb") as f:
            return f.read()
    except (OSError, EOFError) as e:
        raise DatasetError(f"Could not read {path}: {e}") from e


def parse_idx(
    raw: bytes, *, expected_magic: int | tuple[int, ...], name: str = "IDX"
) -> np.ndarray:
    """Decode an unsigned-byte IDX payload, checking magic and length."""
    allowed = (expected_magic,) if isinstance(expected_magic, int) else expected_magic
    if len(raw) < 4:
        raise IdxTruncatedError(f"{name}: {len(raw)} bytes is shorter than the magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic not in allowed:
        wanted = " or ".join(f"0x{m:08x}" for m in allowed)
        raise IdxMagicError(f"{name}: magic 0x{magic:08x}, expected {wanted}")

    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxTruncatedError(f"{name}: header needs {header} bytes, file has {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    available = len(raw) - header
    if available < size:
        raise IdxTruncatedError(
            f"{name}: dimensions {dims} need {size} payload bytes, found {available}"
        )
    if available > size:
        raise DatasetError(f"{name}: {available - size} trailing bytes after the payload")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims).copy()


def read_idx(path: str | Path, expected_magic: int | tuple[int, ...]) -> np.ndarray:
    return parse_idx(_read_bytes(path), expected_magic=expected_magic, name=str(path))


def encode_idx(array: np.ndarray) -> bytes:
    if array.dtype != np.uint8:
        raise DatasetError(f"IDX writer supports uint8 arrays only, got {array.dtype}")
    if not 1 <= array.ndim <= 255:
        raise DatasetError(f"cannot encode a {array.ndim}-dimensional array")
    header = struct.pack(">I", (UBYTE << 8) | array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def write_idx(array: np.ndarray, path: str | Path) -> Path:
    """Write ``array`` (uint8) as an IDX file; ``.gz`` paths are compressed."""
    dest = Path(path)
    payload = encode_idx(array)
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        if dest.suffix == ".gz":
            # mtime=0 keeps the archive bytes reproducible
            with gzip.GzipFile(dest, "wb", mtime=0) as f:
                f.write(payload)
        else:
            dest.write_bytes(payload)
    except OSError as e:
        raise DatasetError(f"Could not write {dest}: {e}") from e
    return dest


def load_mnist_idx(
    images_path: str | Path,
    labels_path: str | Path,
    *,
    class_count: int = 10,
    split: Split = Split.TRAIN,
) -> ImageDataset:
    """Read an image/label IDX pair into an ImageDataset.

    Images may be B x s x s (single channel, magic 0x803) or B x C x s x s (0x804).
    """
    images = read_idx(images_path, (IMAGES_MAGIC, IMAGES_MAGIC + 1))
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images_path} holds {images.shape[0]} images but "
            f"{labels_path} holds {labels.shape[0]} labels"
        )
    if images.ndim == 3:
        images = images[:, None]
    try:
        dataset = ImageDataset(
            images=images, labels=labels.astype(np.int64), class_count=class_count, split=split
        )
    except ValidationError as e:
        raise DatasetError(f"{labels_path}: {e.errors()[0]['msg']}") from e
    logger.debug("Loaded %d %s samples from %s", len(dataset), split.value, images_path)
    return dataset


def write_dataset_idx(
    dataset: ImageDataset, images_path: str | Path, labels_path: str | Path
) -> None:
    """Export a dataset in the layout :func:`load_mnist_idx` reads back."""
    images = dataset.images
    if images.dtype != np.uint8:
        images = np.rint(np.clip(images, 0.0, 1.0) * 255).astype(np.uint8)
    if images.shape[1] == 1:
        images = images[:, 0]
    if dataset.class_count > 256:
        raise DatasetError(f"{dataset.class_count} classes do not fit unsigned-byte labels")
    write_idx(images, images_path)
    write_idx(dataset.labels.astype(np.uint8), labels_path)
