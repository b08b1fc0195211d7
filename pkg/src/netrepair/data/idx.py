"""IDX (MNIST container) reader.

Image files::

    [offset] [type]          [value]
    0000     32 bit integer  0x00000803  magic (big-endian)
    0004     32 bit integer  n           number of images
    0008     32 bit integer  rows
    0012     32 bit integer  cols
    0016     unsigned byte   pixels, row-major

Label files carry magic 0x00000801, a count, then one unsigned byte per label.
Gzipped files are read transparently.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .dataset import DatasetError, LabeledDataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def _read(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 16:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise DatasetError(f"{path}: wrong magic 0x{magic:08x} for an image file (expected 0x{IMAGE_MAGIC:08x})")
    need = n * rows * cols
    if len(raw) - 16 < need:
        raise DatasetError(f"{path}: truncated payload ({len(raw) - 16} of {need} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 8:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise DatasetError(f"{path}: wrong magic 0x{magic:08x} for a label file (expected 0x{LABEL_MAGIC:08x})")
    if len(raw) - 8 < n:
        raise DatasetError(f"{path}: truncated payload ({len(raw) - 8} of {n} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def load_idx(images_path, labels_path, split: str = "train", class_count: int = 10) -> LabeledDataset:
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise DatasetError(f"count mismatch: {len(pixels)} images vs {len(labels)} labels")
    images = (pixels.astype(np.float32) / 255.0)[:, None, :, :]
    return LabeledDataset(images, labels, class_count, split)


def write_idx(images_path, labels_path, pixels: np.ndarray, labels: np.ndarray):
    """Write uint8 ``pixels`` (n, rows, cols) and ``labels`` as IDX files."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + pixels.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABEL_MAGIC, len(labels))
                                  + np.asarray(labels, dtype=np.uint8).tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist(directory) -> dict[str, tuple[Path, Path]] | None:
    """Locate the four MNIST-style files (optionally ``.gz``) in ``directory``."""
    directory = Path(directory)
    found = {}
    for split, names in MNIST_FILES.items():
        pair = []
        for stem in names:
            for cand in (directory / stem, directory / (stem + ".gz"),
                         directory / stem.replace("-idx", ".idx")):
                if cand.exists():
                    pair.append(cand)
                    break
        if len(pair) != 2:
            return None
        found[split] = tuple(pair)
    return found
