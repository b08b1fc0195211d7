"""Glass, motion and zoom blur on (c, h, w) images in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

CORRUPTION_KINDS = ("glass", "motion", "zoom")
MAX_SEVERITY = 5


class CorruptionError(ValueError):
    pass


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise CorruptionError(f"unknown corruption {self.kind!r}; choose from {CORRUPTION_KINDS}")
        if not 0 <= int(self.severity) <= MAX_SEVERITY:
            raise CorruptionError(f"severity must lie in 0..{MAX_SEVERITY}, got {self.severity}")

    @property
    def key(self) -> str:
        return f"{self.kind}{self.severity}"


def motion_blur(image: np.ndarray, severity: int) -> np.ndarray:
    """Horizontal box filter of length ``2*severity + 1`` with reflect padding."""
    s = int(severity)
    padded = np.pad(image.astype(np.float64), ((0, 0), (0, 0), (s, s)), mode="reflect")
    return sliding_window_view(padded, 2 * s + 1, axis=2).mean(axis=-1)


def _bilinear_zoom(image: np.ndarray, factor: float) -> np.ndarray:
    # sample the centre crop of side 1/factor at every output pixel centre
    c, h, w = image.shape
    sy = (np.arange(h) + 0.5 - h / 2) / factor + h / 2 - 0.5
    sx = (np.arange(w) + 0.5 - w / 2) / factor + w / 2 - 0.5
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(sy - y0, 0.0, 1.0)[:, None]
    fx = np.clip(sx - x0, 0.0, 1.0)[None, :]
    img = image.astype(np.float64)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bottom = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bottom * fy


def zoom_blur(image: np.ndarray, severity: int) -> np.ndarray:
    """Mean of centre zooms at factors 1, 1.04, ..., 1 + 0.04*severity."""
    zooms = [_bilinear_zoom(image, 1.0 + 0.04 * i) for i in range(int(severity) + 1)]
    return np.mean(zooms, axis=0)


def glass_blur(image: np.ndarray, severity: int, seed: int) -> np.ndarray:
    """``severity`` raster-order passes swapping each pixel with a random neighbour (radius 1)."""
    c, h, w = image.shape
    rng = np.random.default_rng(seed)
    planes = [image[ch].astype(np.float64).ravel().tolist() for ch in range(c)]
    for _ in range(int(severity)):
        dy, dx = rng.integers(-1, 2, size=(2, h, w))
        ny = np.clip(np.arange(h)[:, None] + dy, 0, h - 1)
        nx = np.clip(np.arange(w)[None, :] + dx, 0, w - 1)
        targets = (ny * w + nx).ravel().tolist()
        for p, q in enumerate(targets):
            if p != q:
                for plane in planes:
                    plane[p], plane[q] = plane[q], plane[p]
    return np.asarray(planes).reshape(c, h, w)


def corrupt(image: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3:
        raise CorruptionError(f"expected a (c, h, w) image, got shape {image.shape}")
    if spec.severity == 0:
        return image.copy()
    if spec.kind == "motion":
        out = motion_blur(image, spec.severity)
    elif spec.kind == "zoom":
        out = zoom_blur(image, spec.severity)
    else:
        out = glass_blur(image, spec.severity, spec.seed)
    return np.clip(out, 0.0, 1.0).astype(image.dtype if image.dtype.kind == "f" else np.float32)


def corrupt_batch(images: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    """Image ``i`` is corrupted with seed ``spec.seed + i``."""
    if spec.severity == 0:
        return np.array(images, copy=True)
    return np.stack([corrupt(img, CorruptionSpec(spec.kind, spec.severity, spec.seed + i))
                     for i, img in enumerate(images)]) if len(images) else np.array(images, copy=True)
