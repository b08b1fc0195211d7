"""Labeled image datasets and the checksummed native container."""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass
class LabeledDataset:
    images: np.ndarray  # (n, c, h, w) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64
    class_count: int
    split: str = "train"
    tags: list | None = None  # optional per-sample provenance, not carried through subset/concat

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DatasetError(f"images must be (n, c, h, w), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.split not in ("train", "test"):
            raise DatasetError(f"split must be train or test, got {self.split!r}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DatasetError(f"labels must lie in [0, {self.class_count})")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DatasetError("pixel values must lie in [0, 1]")

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return tuple(self.images.shape[1:])

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx], self.class_count, self.split)

    def concat(self, other: "LabeledDataset") -> "LabeledDataset":
        return LabeledDataset(np.concatenate([self.images, other.images]),
                              np.concatenate([self.labels, other.labels]), self.class_count, self.split)


@dataclass
class DatasetSplits:
    """A named train/test pair."""

    name: str
    train: LabeledDataset
    test: LabeledDataset
    meta: dict = field(default_factory=dict)

    @property
    def class_count(self):
        return self.test.class_count

    @property
    def input_shape(self):
        return self.test.shape


NATIVE_MAGIC = b"AIRDATA\x00"
NATIVE_VERSION = 1


def save_native(ds: LabeledDataset, path) -> Path:
    """Write ``ds`` as magic + u32 version + u64 header length + JSON header + blobs."""
    path = Path(path)
    img = ds.images.astype("<f4").tobytes()
    lab = ds.labels.astype("<u4").tobytes()
    header = {
        "count": len(ds), "shape": list(ds.shape), "class_count": ds.class_count, "split": ds.split,
        "image_bytes": len(img), "label_bytes": len(lab), "crc32": zlib.crc32(img + lab),
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(NATIVE_MAGIC + struct.pack("<IQ", NATIVE_VERSION, len(hb)) + hb + img + lab)
    os.replace(tmp, path)
    return path


def load_native(path) -> LabeledDataset:
    raw = Path(path).read_bytes()
    if raw[:8] != NATIVE_MAGIC:
        raise DatasetError(f"{path}: not a native dataset file (bad magic)")
    if len(raw) < 20:
        raise DatasetError(f"{path}: truncated header")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != NATIVE_VERSION:
        raise DatasetError(f"{path}: unsupported version {version}")
    header = json.loads(raw[20:20 + hlen].decode("utf-8"))
    body = raw[20 + hlen:]
    if len(body) != header["image_bytes"] + header["label_bytes"]:
        raise DatasetError(f"{path}: truncated payload")
    if zlib.crc32(body) != header["crc32"]:
        raise DatasetError(f"{path}: checksum mismatch")
    n = header["count"]
    images = np.frombuffer(body[:header["image_bytes"]], dtype="<f4").reshape([n] + header["shape"])
    labels = np.frombuffer(body[header["image_bytes"]:], dtype="<u4").astype(np.int64)
    return LabeledDataset(images.astype(np.float32), labels, header["class_count"], header["split"])
