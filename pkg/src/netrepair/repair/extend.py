"""Architecture extension: zero-initialised residual correction units on a frozen model."""

from __future__ import annotations

import numpy as np

from ..engine import LossSpec, train_epochs
from ..model import Model, correction_unit, init_layer_weights, layer_shapes, param_shapes
from .common import run_repair
from .config import RepairConfig, constraint_or_default


class PositionError(ValueError):
    pass


def _boundary(model: Model, position) -> int:
    n = len(model.layers)
    if position is None:
        return n - 1
    if isinstance(position, (int, np.integer)):
        if not 0 <= position <= n:
            raise PositionError(f"boundary {position} outside 0..{n}")
        return int(position)
    if isinstance(position, str):
        if position.lstrip("-").isdigit():
            return _boundary(model, int(position) % (n + 1) if position.startswith("-") else int(position))
        before, _, name = position.partition(":") if ":" in position else ("before", "", position)
        names = [l.name for l in model.layers]
        if name not in names:
            raise PositionError(f"no layer named {name!r}; layers: {names}")
        i = names.index(name)
        if before == "before":
            return i
        if before == "after":
            return i + 1
    raise PositionError(f"invalid position {position!r}")


def attach_correction_unit(model: Model, position=None, width: int = 64, seed: int = 0,
                           name: str | None = None) -> Model:
    """Insert ``x + U(x)`` at a layer boundary and freeze every existing weight.

    ``position`` is a boundary index (insert before ``layers[i]``), a layer
    name or ``"before:<name>"`` / ``"after:<name>"``; the default is just before
    the final layer. ``U`` is a dense bottleneck on flat features and a 1x1
    convolution bottleneck on feature maps; its output projection starts at
    zero, so the extended model computes exactly the same logits.
    """
    i = _boundary(model, position)
    shape = layer_shapes(model.layers, model.input_shape)[i]
    taken = {l.name for l in model.layers}
    if name is None:
        k = 1
        while f"corr{k}" in taken:
            k += 1
        name = f"corr{k}"
    elif name in taken:
        raise PositionError(f"layer name {name!r} already used")
    unit = correction_unit(name, shape[0], width, "dense" if len(shape) == 1 else "conv")
    out = model.copy()
    frozen = sorted(set(out.metadata.get("frozen", [])) | set(out.weights))
    new_weights = init_layer_weights(unit, np.random.default_rng(seed))
    weights = {}
    for layer in out.layers[:i]:
        weights.update({k: out.weights[k] for k in param_shapes(layer)})
    weights.update(new_weights)
    for layer in out.layers[i:]:
        weights.update({k: out.weights[k] for k in param_shapes(layer)})
    out.layers.insert(i, unit)
    out.weights = weights
    out.metadata["frozen"] = frozen
    out.metadata.setdefault("correction_units", []).append({"name": name, "boundary": i, "width": width})
    out.validate()
    return out


def repair_extend(model, data, spec=None, config: RepairConfig | None = None, emit=None, corruptions=()):
    """Attach one correction unit (default before the final layer) and train only
    its parameters on ``cross-entropy + lam * constraint_loss``."""
    config = config or RepairConfig("extend-correct")
    spec = constraint_or_default(spec, model.num_classes)
    loss = LossSpec(config.lam, spec) if config.lam > 0 else LossSpec()

    def body(model, failing, passing, sink):
        ext = attach_correction_unit(model, config.position, config.width, seed=config.seed)
        unit = ext.metadata["correction_units"][-1]["name"]
        sink("unit_attached", {"name": unit, "width": config.width,
                               "params": int(sum(ext.weights[k].size for k in ext.trainable_names()))})
        if config.epoch == 0:
            return ext

        def progress(epoch, value, m):
            sink("epoch", {"epoch": epoch + 1, "loss": value})

        trained, _ = train_epochs(ext, data.train, config.epoch, config.batch_size, config.lr, config.seed,
                                  config.momentum, loss, callbacks=[progress])
        return trained

    return run_repair(body, model, data, config, spec, emit, corruptions)
