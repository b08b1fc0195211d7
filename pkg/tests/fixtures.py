"""Shared small fixtures: trained models and hand-built defects."""

from __future__ import annotations

import numpy as np

from netrepair.data import synthetic_splits
from netrepair.engine import loss_and_grads, predict, train_epochs
from netrepair.model import Model, dense, flatten, init_weights, relu

SMALL_SHAPE = (1, 12, 12)


def small_splits(seed: int = 0, n_train: int = 100, n_test: int = 30, classes: int = 10, noise: float = 0.1):
    return synthetic_splits(classes, n_train, n_test, shape=SMALL_SHAPE, seed=seed, noise=noise)


def small_ffnn(seed: int = 0, hidden: int = 32, classes: int = 10, shape=SMALL_SHAPE) -> Model:
    n_in = int(np.prod(shape))
    layers = [flatten("flatten"), dense("fc1", n_in, hidden), relu("relu1"), dense("fc2", hidden, classes)]
    return Model("ffnn", 2, tuple(shape), classes, layers, init_weights(layers, seed))


def trained_small_ffnn(seed: int = 0, epochs: int = 40, data=None):
    data = data or small_splits(seed)
    model, _ = train_epochs(small_ffnn(seed), data.train, epochs, 32, 0.05, seed)
    return model, data


def single_zeroed_weight_fixture(seed: int = 0):
    """Trained FFNN with the one last-layer weight whose zeroing breaks the most test samples.

    Returns ``(defective, original, data, coordinate)``.
    """
    model, data = trained_small_ffnn(seed)
    w = model.weights["fc2.weight"]
    labels = data.test.labels
    best, worst = None, -1
    for i in range(w.size):
        m = model.copy()
        m.weights["fc2.weight"].flat[i] = 0.0
        wrong = int(np.sum(predict(m, data.test.images) != labels))
        if wrong > worst:
            best, worst = i, wrong
    defective = model.copy()
    defective.weights["fc2.weight"].flat[best] = 0.0
    return defective, model, data, ("fc2.weight", best)


def exhaustive_delta_loss_ranking(model: Model, failing, names=("fc1.weight", "fc2.weight"), rel: float = 0.5):
    """Rank every coordinate by the best failing-set loss decrease from moving it alone.

    Each weight is tried at ``w +- (rel*|w| + 0.05)``; the score is the larger decrease.
    Returns a list of ``(param, flat_index)`` sorted by descending decrease.
    """
    base, _ = loss_and_grads(model, failing.images, failing.labels, names=[])
    scored = []
    for name in names:
        w = model.weights[name]
        for i in range(w.size):
            orig = float(w.flat[i])
            gains = []
            for sign in (1.0, -1.0):
                m = model.copy()
                m.weights[name].flat[i] = orig + sign * (rel * abs(orig) + 0.05)
                value, _ = loss_and_grads(m, failing.images, failing.labels, names=[])
                gains.append(base - value)
            scored.append((max(gains), name, i))
    order = sorted(range(len(scored)), key=lambda k: (-scored[k][0], k))
    return [(scored[k][1], scored[k][2]) for k in order]


def _normal_weights(layers, seed, sigma=0.1):
    rng = np.random.default_rng(seed)
    return {k: rng.normal(0.0, sigma, v.shape).astype(np.float32) for k, v in init_weights(layers, seed).items()}


def gradient_models(seed: int = 0) -> dict[str, tuple[Model, np.ndarray, np.ndarray]]:
    """One small model per layer kind, parameters ~ N(0, 0.1), with a batch and labels."""
    from netrepair.model import conv2d, correction_unit, maxpool2d, residual_block

    rng = np.random.default_rng(1000 + seed)
    shape = (2, 6, 6)
    specs = {
        "dense": [flatten(), dense("fc1", 72, 6), relu("r1"), dense("fc2", 6, 4)],
        "conv2d": [conv2d("c1", 2, 3, 3, 1, 1), relu("r1"), conv2d("c2", 3, 2, 3, 2, 0), flatten(),
                   dense("fc", 8, 4)],
        "maxpool2d": [conv2d("c1", 2, 3, 3, 1, 1), maxpool2d("p1"), flatten(), dense("fc", 27, 4)],
        "residual-block": [residual_block("b1", 2, 2), residual_block("b2", 2, 3, stride=2), flatten(),
                           dense("fc", 27, 4)],
        "correction": [conv2d("c1", 2, 3, 3, 1, 1), correction_unit("u1", 3, 2, "conv"), flatten(),
                       dense("fc1", 108, 5), correction_unit("u2", 5, 3, "dense"), dense("fc2", 5, 4)],
    }
    out = {}
    for kind, layers in specs.items():
        model = Model(kind, 1, shape, 4, layers, _normal_weights(layers, seed))
        x = rng.uniform(0.0, 1.0, size=(4, *shape))
        y = rng.integers(0, 4, size=4)
        out[kind] = (model, x, y)
    return out


def sign_flipped_linear_fixture(seed: int = 0):
    """Two-class linear model with its largest-magnitude weight sign-flipped.

    Returns ``(defective, data, coordinate)``.
    """
    data = synthetic_splits(2, 100, 50, shape=(1, 6, 6), seed=seed)
    layers = [flatten(), dense("fc", 36, 2)]
    model = Model("linear", 1, (1, 6, 6), 2, layers, init_weights(layers, seed))
    model, _ = train_epochs(model, data.train, 10, 16, 0.05, seed)
    i = int(np.argmax(np.abs(model.weights["fc.weight"])))
    model.weights["fc.weight"].flat[i] *= -1
    return model, data, ("fc.weight", i)
