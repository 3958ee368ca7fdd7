"""Tests for vitctl.data.idx."""

from __future__ import annotations

import gzip
import struct

import numpy as np
import pytest

from vitctl.data.idx import (
    IMAGES_MAGIC,
    LABELS_MAGIC,
    encode_idx,
    load_mnist_idx,
    parse_idx,
    read_idx,
    write_dataset_idx,
    write_idx,
)
from vitctl.exceptions import (
    DatasetError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
)
from vitctl.models import ImageDataset, Split


def _write_pair(tmp_path, images: np.ndarray, labels: np.ndarray):
    images_path = write_idx(images, tmp_path / "images-idx3-ubyte")
    labels_path = write_idx(labels, tmp_path / "labels-idx1-ubyte")
    return images_path, labels_path


class TestParse:
    def test_header_layout(self):
        raw = encode_idx(np.zeros((2, 3, 3), dtype=np.uint8))
        assert raw[:4] == b"\x00\x00\x08\x03"
        assert struct.unpack(">3I", raw[4:16]) == (2, 3, 3)
        assert len(raw) == 16 + 18

    def test_labels_magic(self):
        raw = encode_idx(np.arange(5, dtype=np.uint8))
        assert struct.unpack(">I", raw[:4])[0] == LABELS_MAGIC

    def test_decodes_payload(self):
        arr = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
        out = parse_idx(encode_idx(arr), expected_magic=IMAGES_MAGIC)
        assert np.array_equal(out, arr)

    def test_wrong_magic(self):
        raw = encode_idx(np.zeros(4, dtype=np.uint8))
        with pytest.raises(IdxMagicError, match="0x00000801"):
            parse_idx(raw, expected_magic=IMAGES_MAGIC)

    def test_too_short_for_magic(self):
        with pytest.raises(IdxTruncatedError):
            parse_idx(b"\x00\x00", expected_magic=LABELS_MAGIC)

    def test_truncated_header(self):
        raw = encode_idx(np.zeros((2, 2, 2), dtype=np.uint8))[:10]
        with pytest.raises(IdxTruncatedError, match="header"):
            parse_idx(raw, expected_magic=IMAGES_MAGIC)

    def test_truncated_payload(self):
        raw = encode_idx(np.zeros((2, 2, 2), dtype=np.uint8))[:-1]
        with pytest.raises(IdxTruncatedError, match="payload"):
            parse_idx(raw, expected_magic=IMAGES_MAGIC)

    def test_trailing_bytes(self):
        raw = encode_idx(np.zeros(3, dtype=np.uint8)) + b"\x00"
        with pytest.raises(DatasetError, match="trailing"):
            parse_idx(raw, expected_magic=LABELS_MAGIC)

    def test_encode_rejects_non_uint8(self):
        with pytest.raises(DatasetError, match="uint8"):
            encode_idx(np.zeros(3, dtype=np.float32))


class TestFiles:
    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            read_idx(tmp_path / "missing", LABELS_MAGIC)

    def test_gzip_transparent(self, tmp_path):
        arr = np.arange(6, dtype=np.uint8)
        path = write_idx(arr, tmp_path / "labels.gz")
        with gzip.open(path, "rb") as f:
            assert f.read()[:4] == b"\x00\x00\x08\x01"
        assert np.array_equal(read_idx(path, LABELS_MAGIC), arr)

    def test_gzip_bytes_reproducible(self, tmp_path):
        arr = np.arange(6, dtype=np.uint8)
        a = write_idx(arr, tmp_path / "a.gz").read_bytes()
        b = write_idx(arr, tmp_path / "b.gz").read_bytes()
        assert a == b

    def test_load_pair(self, tmp_path):
        images = np.random.default_rng(0).integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
        labels = np.array([0, 1, 2, 9, 4], dtype=np.uint8)
        ds = load_mnist_idx(*_write_pair(tmp_path, images, labels), split=Split.TEST)
        assert ds.images.shape == (5, 1, 28, 28)
        assert np.array_equal(ds.images[:, 0], images)
        assert ds.labels.dtype == np.int64
        assert ds.split == Split.TEST

    def test_labels_given_as_images(self, tmp_path):
        images = np.zeros((2, 4, 4), dtype=np.uint8)
        images_path, _ = _write_pair(tmp_path, images, np.zeros(2, dtype=np.uint8))
        with pytest.raises(IdxMagicError):
            load_mnist_idx(images_path, images_path)

    def test_count_mismatch(self, tmp_path):
        paths = _write_pair(tmp_path, np.zeros((3, 4, 4), dtype=np.uint8),
                            np.zeros(2, dtype=np.uint8))
        with pytest.raises(IdxCountMismatchError, match="3 images"):
            load_mnist_idx(*paths)

    def test_label_out_of_range(self, tmp_path):
        paths = _write_pair(tmp_path, np.zeros((2, 4, 4), dtype=np.uint8),
                            np.array([0, 12], dtype=np.uint8))
        with pytest.raises(DatasetError):
            load_mnist_idx(*paths, class_count=10)

    def test_multichannel_images(self, tmp_path):
        images = np.zeros((2, 3, 4, 4), dtype=np.uint8)
        paths = _write_pair(tmp_path, images, np.array([0, 1], dtype=np.uint8))
        ds = load_mnist_idx(*paths, class_count=2)
        assert ds.channels == 3


class TestExport:
    def test_export_and_reload(self, tmp_path, random_dataset):
        write_dataset_idx(random_dataset, tmp_path / "x-idx3-ubyte.gz", tmp_path / "y.gz")
        back = load_mnist_idx(tmp_path / "x-idx3-ubyte.gz", tmp_path / "y.gz", class_count=2)
        assert np.array_equal(back.images, random_dataset.images)
        assert np.array_equal(back.labels, random_dataset.labels)

    def test_float_images_quantized(self, tmp_path):
        ds = ImageDataset(
            images=np.array([[[[0.0, 1.0], [0.5, 0.25]]]], dtype=np.float32),
            labels=np.array([1]),
            class_count=2,
        )
        write_dataset_idx(ds, tmp_path / "x", tmp_path / "y")
        raw = read_idx(tmp_path / "x", IMAGES_MAGIC)
        assert raw.tolist() == [[[0, 255], [128, 64]]]
