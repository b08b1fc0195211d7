"""Class-group constraints: the satisfaction predicate and its hinge-style loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConstraintSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSpec:
    """Every group's probability mass must be >= 1 - epsilon or <= epsilon."""

    groups: tuple[tuple[int, ...], ...]
    epsilon: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(int(c) for c in g) for g in self.groups))
        if not self.groups or any(len(g) == 0 for g in self.groups):
            raise ConstraintSpecError("constraint groups must be non-empty")
        if not 0.0 < self.epsilon <= 0.5:
            raise ConstraintSpecError(f"epsilon must lie in (0, 0.5], got {self.epsilon}")

    def check(self, num_classes: int):
        for g in self.groups:
            for c in g:
                if not 0 <= c < num_classes:
                    raise ConstraintSpecError(f"class index {c} outside [0, {num_classes})")
        return self

    def membership(self, num_classes: int) -> np.ndarray:
        """(groups, classes) 0/1 matrix."""
        self.check(num_classes)
        m = np.zeros((len(self.groups), num_classes))
        for i, g in enumerate(self.groups):
            m[i, list(g)] = 1.0
        return m

    def to_dict(self):
        return {"groups": [list(g) for g in self.groups], "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(g) for g in d["groups"]), float(d["epsilon"]))


def default_constraint(num_classes: int) -> ConstraintSpec:
    """Lower half of the classes versus the upper half, epsilon 0.05."""
    half = num_classes // 2
    return ConstraintSpec((tuple(range(half)), tuple(range(half, num_classes))), 0.05)


def group_masses(probs: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    return probs @ spec.membership(probs.shape[1]).T


def satisfied(probs: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    s = group_masses(probs, spec)
    eps = spec.epsilon
    return np.all((s >= 1.0 - eps) | (s <= eps), axis=1)


def _violation(s, eps):
    low = np.maximum(0.0, (1.0 - eps) - s)
    high = np.maximum(0.0, s - eps)
    return low, high


def constraint_loss(probs: np.ndarray, spec: ConstraintSpec) -> float:
    """Mean over samples and groups of ``min(max(0, 1-eps-s), max(0, s-eps))``."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] == 0:
        return 0.0
    low, high = _violation(group_masses(probs, spec), spec.epsilon)
    return float(np.minimum(low, high).mean())


def constraint_loss_grad(probs: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    """Subgradient w.r.t. ``probs``; zero at kinks and where satisfied."""
    probs = np.asarray(probs, dtype=np.float64)
    m = spec.membership(probs.shape[1])
    low, high = _violation(probs @ m.T, spec.epsilon)
    ds = np.where(low < high, -1.0 * (low > 0), np.where(high < low, 1.0 * (high > 0), 0.0))
    ds = ds / (probs.shape[0] * len(spec.groups))
    return ds @ m
