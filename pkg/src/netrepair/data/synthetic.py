"""Download-free corpus: blurred geometric templates plus seeded noise."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataset import DatasetSplits, LabeledDataset


def _templates(classes: int, h: int, w: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    ry, rx = yy - cy, xx - cx
    r = np.hypot(ry / h, rx / w)
    t = 0.09  # stroke half-thickness relative to side length
    inner = (np.abs(ry) < 0.36 * h) & (np.abs(rx) < 0.36 * w)
    shapes = [
        (np.abs(ry) < t * h) & inner,                                    # horizontal bar
        (np.abs(rx) < t * w) & inner,                                    # vertical bar
        (np.abs(ry / h - rx / w) < t * 0.8) & inner,                     # diagonal
        (np.abs(ry / h + rx / w) < t * 0.8) & inner,                     # anti-diagonal
        ((np.abs(ry) < t * h) | (np.abs(rx) < t * w)) & inner,           # cross
        ((np.abs(ry / h - rx / w) < t * 0.8) | (np.abs(ry / h + rx / w) < t * 0.8)) & inner,  # X
        r < 0.2,                                                         # blob
        (r > 0.22) & (r < 0.33),                                         # ring
        ((np.abs(ry + 0.22 * h) < t * h) | (np.abs(ry - 0.22 * h) < t * h)) & inner,  # two bars
        inner & ~((np.abs(ry) < 0.2 * h) & (np.abs(rx) < 0.2 * w)),      # hollow square
    ]
    out = [s.astype(np.float64) for s in shapes[:classes]]
    rng = np.random.default_rng(12345)
    while len(out) < classes:
        # random stroke blobs for class counts beyond the fixed menu
        img = np.zeros((h, w))
        for _ in range(3):
            py, px = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
            img[np.hypot(yy - py, xx - px) < 0.1 * min(h, w)] = 1.0
        out.append(img)
    return np.stack(out)


def make_synthetic(classes: int = 10, n_per_class: int = 100, shape=(1, 28, 28), seed: int = 0,
                   noise: float = 0.1, max_shift: int = 2, split: str = "train") -> LabeledDataset:
    """Class-balanced dataset, samples ordered round-robin by class."""
    if classes < 2:
        raise ValueError("need at least two classes")
    if n_per_class < 0:
        raise ValueError("n_per_class must be >= 0")
    c, h, w = shape
    templates = _templates(classes, h, w)
    rng = np.random.default_rng(seed)
    n = classes * n_per_class
    labels = np.tile(np.arange(classes), n_per_class)
    images = np.empty((n, c, h, w), dtype=np.float32)
    for i, label in enumerate(labels):
        dy, dx = rng.integers(-max_shift, max_shift + 1, size=2)
        base = np.roll(templates[label], (dy, dx), axis=(0, 1))
        gain = rng.uniform(0.7, 1.0, size=c)[:, None, None]
        img = gaussian_filter(base, 1.0)[None] * gain + rng.normal(0.0, noise, size=(c, h, w))
        images[i] = np.clip(img, 0.0, 1.0)
    return LabeledDataset(images, labels, classes, split)


def synthetic_splits(classes: int = 10, n_train: int = 600, n_test: int = 200, shape=(1, 28, 28),
                     seed: int = 0, noise: float = 0.1, name: str = "synthetic") -> DatasetSplits:
    """Train and test drawn from independent streams; ``n_*`` are per class."""
    train_seed, test_seed = np.random.SeedSequence(seed).generate_state(2)
    train = make_synthetic(classes, n_train, shape, int(train_seed), noise, split="train")
    test = make_synthetic(classes, n_test, shape, int(test_seed), noise, split="test")
    return DatasetSplits(name, train, test, {"classes": classes, "seed": seed, "noise": noise})
