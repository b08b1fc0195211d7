"""Retraining with counterexample-guided augmentation."""

from __future__ import annotations

import numpy as np

from ..data import extract_failing_set
from ..engine import LossSpec, epoch_batches, loss_and_grads, sgd_step
from .augment import build_augmented_set
from .common import run_repair
from .config import RepairConfig, constraint_or_default


def repair_finetune(model, data, config: RepairConfig, spec=None, emit=None, corruptions=()):
    """Fine-tune every parameter on the training set, topping up each batch with
    ``extra`` samples from an augmented pool of the current failing inputs.

    The failing set is re-extracted at the start of every epoch.
    """
    spec = constraint_or_default(spec, model.num_classes)
    loss = LossSpec(config.lam, spec) if config.lam > 0 else LossSpec()

    def body(model, failing, passing, sink):
        m = model.copy()
        if config.epoch == 0:
            return m
        train = data.train
        split = data.test if config.failing_split == "test" else data.train
        rng = np.random.default_rng(config.seed)
        state: dict = {}
        names = m.trainable_names()
        for epoch in range(config.epoch):
            current = failing if epoch == 0 else extract_failing_set(m, split)[0]
            pool = build_augmented_set(current, train, config, seed=config.seed + epoch) if len(current) else None
            total, seen = 0.0, 0
            for idx in epoch_batches(len(train), config.batch_size, rng):
                x, y = train.images[idx], train.labels[idx]
                if pool is not None and config.extra:
                    pick = rng.integers(0, len(pool), size=config.extra)
                    x = np.concatenate([x, pool.images[pick]])
                    y = np.concatenate([y, pool.labels[pick]])
                value, grads = loss_and_grads(m, x, y, loss, names)
                m.weights, state = sgd_step(m.weights, grads, config.lr, config.momentum, state)
                total += value * len(y)
                seen += len(y)
            sink("epoch", {"epoch": epoch + 1, "loss": total / seen, "failing": len(current),
                           "pool": 0 if pool is None else len(pool)})
        return m

    return run_repair(body, model, data, config, spec, emit, corruptions)
