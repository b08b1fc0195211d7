"""Direct weight modification: localise suspicious weights, then search them with PSO."""

from __future__ import annotations

import numpy as np

from ..engine import forward
from .common import run_repair
from .config import RepairConfig
from .localize import apply_coordinates, default_scope, localize_faulty_weights, read_coordinates
from .pso import PSOError, pso_optimize


def _sample(ds, n, rng):
    if len(ds) <= n:
        return ds
    return ds.subset(np.sort(rng.choice(len(ds), n, replace=False)))


def _shrink(fitness, orig, best, best_fitness, steps: int = 20):
    """Pull the PSO answer back toward the trained weights without losing fitness.

    The fitness is piecewise constant, so PSO stops at an arbitrary point of a
    plateau. First take the smallest step along orig -> best that keeps the
    best fitness, then revert single coordinates greedily (largest score
    first). Returns the point, the step and the number of reverted coordinates.
    """
    theta, step = best, 1.0
    for t in np.linspace(0.0, 1.0, steps + 1)[1:-1]:
        cand = orig + t * (best - orig)
        if fitness(cand) >= best_fitness:
            theta, step = cand, float(t)
            break
    theta = theta.copy()
    reverted = 0
    for j in range(len(theta)):
        if theta[j] == orig[j]:
            continue
        cand = theta.copy()
        cand[j] = orig[j]
        if fitness(cand) >= best_fitness:
            theta, reverted = cand, reverted + 1
    return theta, step, reverted


def repair_weight_patch(model, data, config: RepairConfig, spec=None, emit=None, corruptions=()):
    """Only the localised coordinates change.

    Fitness is the fix rate on a failing sample plus the retention on an
    equally sized passing sample, evaluated from cached activations at the
    first scoped layer.
    """

    def body(model, failing, passing, sink):
        if len(failing) == 0:
            sink("nothing_to_repair", {})
            return model.copy()
        rng = np.random.default_rng(config.seed)
        fail_s = _sample(failing, config.max_samples, rng)
        pass_s = _sample(passing, len(fail_s), rng)
        scope = config.scope or default_scope(model)
        coords, scores = localize_faulty_weights(model, failing, passing, config.top_k, scope)
        sink("localized", {"coordinates": [c.to_list() for c in coords],
                           "scores": [float(s) for s in scores]})

        start = min(model.layer_index(s) for s in scope)
        x_fail = forward(model, fail_s.images, stop=start)
        x_pass = forward(model, pass_s.images, stop=start)
        y_fail, y_pass = fail_s.labels, pass_s.labels
        probe = model.copy()

        def fitness(theta):
            probe.weights = apply_coordinates(model.weights, coords, theta.astype(np.float32))
            fixed = np.mean(forward(probe, x_fail, start=start).argmax(1) == y_fail)
            kept = np.mean(forward(probe, x_pass, start=start).argmax(1) == y_pass) if len(y_pass) else 1.0
            return fixed + kept

        orig = read_coordinates(model.weights, coords)
        half = config.pso.bound_scale * np.abs(orig) + config.pso.bound_pad
        progress = max(1, config.pso.iters // 10)

        def on_iter(it, best):
            if it % progress == 0:
                sink("pso_iteration", {"iteration": it, "best_fitness": best})

        try:
            res = pso_optimize(fitness, len(coords), (orig - half, orig + half), config.pso, config.seed,
                               init=orig[None, :], target=2.0, callback=on_iter)
        except PSOError as exc:
            sink("pso_diverged", {"error": str(exc)})
            return model.copy(), "diverged"
        sink("pso_done", {"best_fitness": res.best_fitness, "iterations": len(res.trace) - 1,
                          "evaluations": res.evaluations, "trace": res.trace})
        best, step, reverted = _shrink(fitness, orig, res.best, res.best_fitness)
        sink("shrunk", {"step": step, "reverted": reverted})
        repaired = model.copy()
        repaired.weights = apply_coordinates(model.weights, coords, best.astype(np.float32))
        return repaired

    return run_repair(body, model, data, config, spec, emit, corruptions)
