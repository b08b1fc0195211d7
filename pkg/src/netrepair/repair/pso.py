"""Bounded particle swarm optimisation (maximisation)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import PSOParams

logger = logging.getLogger(__name__)


class PSOError(RuntimeError):
    pass


@dataclass
class PSOResult:
    best: np.ndarray
    best_fitness: float
    trace: list[float]  # global-best fitness after init and after every iteration
    evaluations: int


def _evaluate(fitness, positions, it):
    values = np.empty(len(positions))
    for i, x in enumerate(positions):
        f = float(fitness(x))
        if not np.isfinite(f):
            raise PSOError(f"non-finite fitness {f} for particle {i} at iteration {it}")
        values[i] = f
    return values


def pso_optimize(fitness: Callable[[np.ndarray], float], dim: int, bounds, params: PSOParams | None = None,
                 seed: int = 0, init=None, target: float | None = None,
                 callback: Callable[[int, float], None] | None = None) -> PSOResult:
    """Maximise ``fitness`` over the box ``bounds = (lo, hi)``.

    Velocities start at zero; positions are uniform in the box except for the
    rows supplied in ``init``. Stops early once ``target`` is reached.
    """
    params = params or PSOParams()
    if dim < 1:
        raise ValueError("dim must be >= 1")
    lo = np.broadcast_to(np.asarray(bounds[0], dtype=np.float64), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(bounds[1], dtype=np.float64), (dim,)).copy()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
        raise ValueError("bounds must be finite with lo <= hi")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=(params.swarm, dim))
    if init is not None:
        init = np.atleast_2d(np.asarray(init, dtype=np.float64))[: params.swarm]
        x[: len(init)] = np.clip(init, lo, hi)
    v = np.zeros_like(x)
    f = _evaluate(fitness, x, 0)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(f))
    gbest, gbest_f = x[g].copy(), float(f[g])
    trace = [gbest_f]
    evals = len(x)
    for it in range(1, params.iters + 1):
        if target is not None and gbest_f >= target:
            break
        r1 = rng.random((params.swarm, dim))
        r2 = rng.random((params.swarm, dim))
        v = params.inertia * v + params.c1 * r1 * (pbest - x) + params.c2 * r2 * (gbest - x)
        x = np.clip(x + v, lo, hi)
        f = _evaluate(fitness, x, it)
        evals += len(x)
        better = f > pbest_f
        pbest[better], pbest_f[better] = x[better], f[better]
        g = int(np.argmax(pbest_f))
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        trace.append(gbest_f)
        if callback is not None:
            callback(it, gbest_f)
    return PSOResult(gbest, gbest_f, trace, evals)
