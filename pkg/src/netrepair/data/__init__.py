from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .corrupt import CORRUPTION_KINDS, CorruptionError, CorruptionSpec, corrupt, corrupt_batch
from .dataset import DatasetError, DatasetSplits, LabeledDataset, load_native, save_native
from .idx import find_mnist, load_idx, write_idx
from .mixing import draw_mix_ratio, mix_samples
from .synthetic import make_synthetic, synthetic_splits

__all__ = [
    "CORRUPTION_KINDS", "CorruptionError", "CorruptionSpec", "DatasetError", "DatasetSplits",
    "LabeledDataset", "corrupt", "corrupt_batch", "draw_mix_ratio", "extract_failing_set",
    "find_mnist", "load_dataset", "load_idx", "load_native", "make_synthetic", "mix_samples",
    "save_native", "synthetic_splits", "write_idx",
]

DATA_DIR_ENV = "NETREPAIR_DATA_DIR"


def extract_failing_set(model, dataset: LabeledDataset):
    """Split ``dataset`` into (failing, passing) by argmax correctness, preserving order."""
    from ..engine import predict

    if dataset.class_count != model.num_classes:
        raise DatasetError(f"dataset has {dataset.class_count} classes, model {model.num_classes}")
    if len(dataset) and dataset.shape != model.input_shape:
        raise DatasetError(f"dataset sample shape {dataset.shape} != model input {model.input_shape}")
    correct = predict(model, dataset.images) == dataset.labels if len(dataset) else np.zeros(0, bool)
    return dataset.subset(np.flatnonzero(~correct)), dataset.subset(np.flatnonzero(correct))


def _subsample(ds: LabeledDataset, n: int | None, seed: int) -> LabeledDataset:
    if n is None or n >= len(ds):
        return ds
    idx = np.sort(np.random.default_rng(seed).choice(len(ds), n, replace=False))
    return ds.subset(idx)


def load_dataset(name: str, data_dir=None, seed: int = 0, train_size: int | None = None,
                 test_size: int | None = None) -> DatasetSplits:
    """Resolve a dataset name to train/test splits.

    ``synthetic`` and ``toy`` are generated; ``mnist``/``fashion-mnist`` read IDX
    files from ``data_dir`` (or ``$NETREPAIR_DATA_DIR/<name>``); any other value
    is a directory holding ``train.airdata`` and ``test.airdata``.
    """
    key = name.lower()
    if key == "synthetic":
        return synthetic_splits(10, 600, 200, seed=seed, name="synthetic")
    if key == "toy":
        # noisier corpus whose classifiers stay uncertain across class groups
        return synthetic_splits(10, 300, 100, seed=seed, noise=0.8, name="toy")
    if key in ("mnist", "fashion-mnist", "fmnist"):
        root = Path(data_dir) if data_dir else Path(os.environ.get(DATA_DIR_ENV, "data")) / key
        files = find_mnist(root)
        if files is None:
            raise DatasetError(f"IDX files for {name} not found in {root}")
        train = _subsample(load_idx(*files["train"], split="train"), train_size, seed)
        test = _subsample(load_idx(*files["test"], split="test"), test_size, seed + 1)
        return DatasetSplits(key, train, test, {"source": str(root)})
    root = Path(name)
    if (root / "train.airdata").exists() and (root / "test.airdata").exists():
        train, test = load_native(root / "train.airdata"), load_native(root / "test.airdata")
        return DatasetSplits(root.name, train, test, {"source": str(root)})
    raise DatasetError(f"unknown dataset {name!r}")
