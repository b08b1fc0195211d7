"""Blend and cutmix mixing of two labeled samples."""

from __future__ import annotations

import math

import numpy as np

MIX_MODES = ("blend", "cutmix")


def cutmix_box(h: int, w: int, area_fraction: float, rng: np.random.Generator):
    """Seeded (top, left, height, width) rectangle covering about ``area_fraction`` of the image."""
    if area_fraction <= 0:
        return 0, 0, 0, 0
    target = area_fraction * h * w
    ph = min(h, max(1, int(round(h * math.sqrt(area_fraction)))))
    pw = min(w, max(1, int(round(target / ph))))
    top = int(rng.integers(0, h - ph + 1))
    left = int(rng.integers(0, w - pw + 1))
    return top, left, ph, pw


def mix_samples(a, b, ratio: float, mode: str = "blend", seed: int = 0):
    """Mix ``(image, label)`` pairs ``a`` and ``b``.

    ``ratio`` is the share of ``a``; the label is ``a``'s when ``ratio >= 0.5``.
    """
    (xa, ya), (xb, yb) = a, b
    xa, xb = np.asarray(xa), np.asarray(xb)
    if xa.shape != xb.shape:
        raise ValueError(f"cannot mix shapes {xa.shape} and {xb.shape}")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    if mode not in MIX_MODES:
        raise ValueError(f"unknown mix mode {mode!r}")
    label = ya if ratio >= 0.5 else yb
    if ratio == 1.0:
        return xa.copy(), label
    if mode == "blend":
        out = ratio * xa.astype(np.float64) + (1.0 - ratio) * xb.astype(np.float64)
        return np.clip(out, 0.0, 1.0).astype(xa.dtype), label
    h, w = xa.shape[-2:]
    top, left, ph, pw = cutmix_box(h, w, 1.0 - ratio, np.random.default_rng(seed))
    out = xa.copy()
    out[..., top:top + ph, left:left + pw] = xb[..., top:top + ph, left:left + pw]
    return out, label


def draw_mix_ratio(rng: np.random.Generator, beta: float, floor: float) -> float:
    """``max(floor, Beta(beta, beta))``."""
    return max(float(floor), float(rng.beta(beta, beta)))
