"""Rank weights by gradient magnitude times forward impact on the failing set."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import layers as L
from ..engine import forward, loss_and_grads
from ..model import Model, parameterized_layers

logger = logging.getLogger(__name__)


class LocalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Coordinate:
    param: str
    index: int  # flat index into the parameter tensor

    def to_list(self):
        return [self.param, self.index]


def default_scope(model: Model) -> list[str]:
    """The last two layers that own parameters."""
    return parameterized_layers(model)[-2:]


def _mean_source(layer, x):
    """Mean source activation per weight entry of ``layer`` given its input batch ``x``."""
    if layer.kind == "dense":
        return x.mean(axis=0)[None, :]
    if layer.kind == "conv2d":
        a = layer.attrs
        cols, _, _ = L._im2col(x, a["kernel_size"], a["stride"], a["padding"])
        k = a["kernel_size"]
        return cols.mean(axis=0).reshape(1, a["in_channels"], k, k)
    raise LocalizationError(f"layer {layer.name!r} ({layer.kind}) is not supported for localisation")


def localize_faulty_weights(model: Model, failing, passing=None, top_k: int = 32,
                            scope: list[str] | None = None) -> tuple[list[Coordinate], np.ndarray]:
    """Top-``top_k`` weight coordinates by ``|dL_failing/dw| * |w * mean source activation|``.

    Ties keep coordinate order (scope layer order, then flat index). Returns the
    coordinates and their scores. ``passing`` is accepted for interface symmetry.
    """
    if failing is None or len(failing) == 0:
        raise LocalizationError("the failing set is empty; nothing to localise")
    scope = list(scope or default_scope(model))
    names = [f"{s}.weight" for s in scope]
    for s in scope:
        layer = model.layers[model.layer_index(s)]
        if layer.kind not in ("dense", "conv2d"):
            raise LocalizationError(f"layer {s!r} ({layer.kind}) is not supported for localisation")
    _, grads = loss_and_grads(model, failing.images, failing.labels, names=names)

    coords, scores = [], []
    for s, name in zip(scope, names):
        i = model.layer_index(s)
        layer = model.layers[i]
        x = forward(model, failing.images, stop=i)
        w = model.weights[name].astype(np.float64)
        impact = np.abs(w * _mean_source(layer, x))
        score = np.abs(grads[name]) * impact
        coords.extend(Coordinate(name, j) for j in range(score.size))
        scores.append(score.ravel())
    scores = np.concatenate(scores)
    if top_k > len(coords):
        logger.warning("top_k=%d exceeds scope size %d; clamping", top_k, len(coords))
        top_k = len(coords)
    order = np.argsort(-scores, kind="stable")[:top_k]
    return [coords[j] for j in order], scores[order]


def apply_coordinates(weights: dict, coords: list[Coordinate], values) -> dict:
    """Copy of ``weights`` with ``coords`` set to ``values`` (only touched tensors are copied)."""
    out = dict(weights)
    copied = set()
    for c, v in zip(coords, values):
        if c.param not in copied:
            out[c.param] = out[c.param].copy()
            copied.add(c.param)
        out[c.param].flat[c.index] = v
    return out


def read_coordinates(weights: dict, coords: list[Coordinate]) -> np.ndarray:
    return np.array([weights[c.param].flat[c.index] for c in coords], dtype=np.float64)
