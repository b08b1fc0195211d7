"""Reproducible defect injection for manufacturing repair targets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import train_epochs
from .model import Model, param_shapes

DEFECT_KINDS = ("weight-noise", "weight-zero", "label-flip-finetune")


class DefectError(ValueError):
    pass


@dataclass(frozen=True)
class DefectSpec:
    """``magnitude`` is the noise sigma, the zeroed fraction, or the number of flip epochs."""

    kind: str
    target_layer: str
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFECT_KINDS:
            raise DefectError(f"unknown defect kind {self.kind!r}; choose from {DEFECT_KINDS}")
        if self.magnitude < 0:
            raise DefectError("magnitude must be >= 0")
        if self.kind == "weight-zero" and self.magnitude > 1:
            raise DefectError("zeroed fraction must be <= 1")


def inject_defect(model: Model, spec: DefectSpec, train=None, lr: float = 0.05, batch_size: int = 128) -> Model:
    """Return a damaged copy of ``model``; only ``spec.target_layer`` changes.

    ``label-flip-finetune`` swaps the labels of two seeded classes in ``train``
    and fine-tunes the target layer on them for ``magnitude`` epochs.
    """
    idx = model.layer_index(spec.target_layer) if spec.target_layer in {l.name for l in model.layers} else None
    if idx is None:
        raise DefectError(f"unknown layer {spec.target_layer!r}; layers: {[l.name for l in model.layers]}")
    names = list(param_shapes(model.layers[idx]))
    if not names:
        raise DefectError(f"layer {spec.target_layer!r} has no weights")
    weight_name = next((n for n in names if n.endswith("weight")), names[0])
    out = model.copy()
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "weight-noise":
        if spec.magnitude > 0:
            w = out.weights[weight_name]
            out.weights[weight_name] = (w + rng.normal(0.0, spec.magnitude, size=w.shape)).astype(np.float32)
    elif spec.kind == "weight-zero":
        w = out.weights[weight_name]
        k = math.floor(spec.magnitude * w.size)
        chosen = rng.choice(w.size, size=k, replace=False) if k else np.zeros(0, dtype=np.int64)
        flat = w.ravel().copy()
        flat[chosen] = 0.0
        out.weights[weight_name] = flat.reshape(w.shape)
    else:
        if train is None:
            raise DefectError("label-flip-finetune needs a training set")
        record = asdict(spec)
        a, b = (int(c) for c in np.sort(rng.choice(train.class_count, size=2, replace=False)))
        flipped = train.labels.copy()
        flipped[train.labels == a] = b
        flipped[train.labels == b] = a
        epochs = int(round(spec.magnitude))
        if epochs:
            relabeled = type(train)(train.images, flipped, train.class_count, train.split)
            out, _ = train_epochs(out, relabeled, epochs, batch_size, lr, seed=spec.seed, params=names)
        record["flipped_classes"] = [a, b]
        out.metadata["defect"] = record
    return out
