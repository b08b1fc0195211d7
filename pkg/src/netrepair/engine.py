"""Forward evaluation, loss gradients, SGD and the seeded training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import layers as L
from .constraints import ConstraintSpec, constraint_loss, constraint_loss_grad
from .model import Model, ShapeError, layer_shapes, param_shapes

logger = logging.getLogger(__name__)


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossSpec:
    """Mean cross-entropy plus ``lam`` times the constraint loss (when ``lam`` > 0)."""

    lam: float = 0.0
    constraint: ConstraintSpec | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise LossError("lam must be >= 0")
        if self.lam > 0 and self.constraint is None:
            raise LossError("a constraint spec is required when lam > 0")


def _check_batch(model: Model, batch: np.ndarray, start: int):
    if start == 0 and tuple(batch.shape[1:]) != model.input_shape:
        first = model.layers[0].name if model.layers else "<input>"
        raise ShapeError(f"layer {first!r} expects batches of shape (N, {', '.join(map(str, model.input_shape))}),"
                         f" got {tuple(batch.shape)}")


def forward(model: Model, batch, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Logits (float64) for ``batch``; ``start``/``stop`` run a slice of the layer list."""
    x = np.asarray(batch, dtype=np.float64)
    _check_batch(model, x, start)
    stop = len(model.layers) if stop is None else stop
    if x.shape[0] == 0:
        out = layer_shapes(model.layers[start:stop], x.shape[1:])[-1]
        return np.zeros((0,) + tuple(out))
    for layer in model.layers[start:stop]:
        x, _ = L.forward(layer, model.weights, x)
    return x


def predict_logits(model: Model, images, batch_size: int = 500, start: int = 0) -> np.ndarray:
    """Chunked :func:`forward` for large evaluation sets."""
    images = np.asarray(images)
    if images.shape[0] <= batch_size:
        return forward(model, images, start=start)
    parts = [forward(model, images[i:i + batch_size], start=start) for i in range(0, images.shape[0], batch_size)]
    return np.concatenate(parts, axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(model: Model, images, batch_size: int = 500) -> np.ndarray:
    """Argmax class per sample; ties go to the lowest class index."""
    return predict_logits(model, images, batch_size).argmax(axis=1)


def _loss_from_logits(logits, labels, loss: LossSpec):
    n, c = logits.shape
    with np.errstate(invalid="ignore", over="ignore"):  # non-finite losses are rejected by the caller
        z = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(z).sum(axis=1))
        logp = z - logsumexp[:, None]
        p = np.exp(logp)
    value = float(-logp[np.arange(n), labels].mean())
    dz = p.copy()
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    if loss.lam > 0:
        value += loss.lam * constraint_loss(p, loss.constraint)
        gp = loss.lam * constraint_loss_grad(p, loss.constraint)
        dz += p * (gp - (gp * p).sum(axis=1, keepdims=True))
    return value, dz


def loss_and_grads(model: Model, batch, labels, loss: LossSpec | None = None,
                   names: Iterable[str] | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Scalar loss and gradients for the trainable parameters (or ``names``)."""
    loss = loss or LossSpec()
    x = np.asarray(batch, dtype=np.float64)
    _check_batch(model, x, 0)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (x.shape[0],):
        raise LossError(f"expected {x.shape[0]} labels, got shape {labels.shape}")
    if x.shape[0] == 0:
        raise LossError("cannot compute a loss on an empty batch")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise LossError(f"labels must lie in [0, {model.num_classes})")
    if loss.lam > 0:
        loss.constraint.check(model.num_classes)

    caches = []
    for layer in model.layers:
        x, cache = L.forward(layer, model.weights, x)
        caches.append(cache)
    value, dy = _loss_from_logits(x, labels, loss)
    if not np.isfinite(value):
        raise LossError(f"non-finite loss {value}")

    wanted = list(model.trainable_names() if names is None else names)
    grads = {}
    # backpropagation stops at the earliest layer owning a wanted parameter
    owners = _param_owners(model)
    first_needed = min((owners[n] for n in wanted), default=len(model.layers))
    for i in range(len(model.layers) - 1, first_needed - 1, -1):
        dy, g = L.backward(model.layers[i], model.weights, caches[i], dy)
        grads.update(g)
    return value, {n: grads[n] for n in wanted}


def _param_owners(model: Model) -> dict[str, int]:
    return {name: i for i, layer in enumerate(model.layers) for name in param_shapes(layer)}


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float,
             momentum: float = 0.0, state: dict | None = None) -> tuple[dict[str, np.ndarray], dict]:
    """One SGD update ``v = momentum*v + g; p = p - lr*v``.

    Only parameters present in ``grads`` move; returns ``(new_params, state)``.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    state = {} if state is None else state
    out = dict(params)
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        g = np.asarray(g, dtype=np.float64)
        if momentum:
            v = momentum * state.get(name, 0.0) + g
            state[name] = v
        else:
            v = g
        out[name] = (p.astype(np.float64) - lr * v).astype(p.dtype)
    return out, state


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches for one epoch."""
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train_epochs(model: Model, dataset, epochs: int, batch_size: int, lr: float, seed: int,
                 momentum: float = 0.9, loss: LossSpec | None = None,
                 callbacks: Iterable[Callable] = (), params: Iterable[str] | None = None
                 ) -> tuple[Model, list[float]]:
    """Train a copy of ``model``; returns it with the per-epoch mean loss trace.

    Shuffling depends only on ``seed``. Only ``params`` (default: the trainable
    parameters) are updated. Each callback is called as
    ``cb(epoch, mean_loss, model)`` after every epoch.
    """
    n = len(dataset.labels)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    model = model.copy()
    rng = np.random.default_rng(seed)
    state: dict = {}
    trace = []
    names = list(model.trainable_names() if params is None else params)
    for epoch in range(epochs):
        total = 0.0
        batches = epoch_batches(n, batch_size, rng)
        for idx in batches:
            value, grads = loss_and_grads(model, dataset.images[idx], dataset.labels[idx], loss, names)
            model.weights, state = sgd_step(model.weights, grads, lr, momentum, state)
            total += value * len(idx)
        trace.append(total / n)
        logger.debug("epoch %d loss %.6f", epoch + 1, trace[-1])
        for cb in callbacks:
            cb(epoch, trace[-1], model)
    return model, trace
