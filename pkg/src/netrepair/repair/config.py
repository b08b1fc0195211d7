from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

from ..constraints import ConstraintSpec

METHODS = ("weight-patch", "finetune-augment", "extend-correct")


class ConfigError(ValueError):
    pass


@dataclass
class PSOParams:
    swarm: int = 32
    iters: int = 100
    inertia: float = 0.73
    c1: float = 1.49
    c2: float = 1.49
    # per-coordinate search box: original +/- (bound_scale * |original| + bound_pad)
    bound_scale: float = 2.0
    bound_pad: float = 0.1

    def __post_init__(self):
        if self.swarm < 1 or self.iters < 0:
            raise ConfigError("PSO needs swarm >= 1 and iters >= 0")


@dataclass
class RepairConfig:
    """Method choice plus every hyperparameter any strategy reads."""

    method: str
    batch_size: int = 128
    lr: float = 0.1
    lam: float = 0.0
    extra: int = 128
    epoch: int = 60
    beta: float = 1.0
    cutmix_prob: float = 0.0
    ratio: float = 0.9
    momentum: float = 0.9
    pso: PSOParams = field(default_factory=PSOParams)
    top_k: int = 32
    scope: list[str] | None = None
    max_samples: int = 512
    width: int = 64
    position: Any = None
    failing_split: str = "test"
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown repair method {self.method!r}; choose from {METHODS}")
        if isinstance(self.pso, dict):
            self.pso = PSOParams(**self.pso)
        checks = [
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.lr > 0, "lr must be > 0"),
            (self.lam >= 0, "lam must be >= 0"),
            (self.extra >= 0, "extra must be >= 0"),
            (self.epoch >= 0, "epoch must be >= 0"),
            (self.beta > 0, "beta must be > 0"),
            (0.0 <= self.cutmix_prob <= 1.0, "cutmix_prob must lie in [0, 1]"),
            (0.0 <= self.ratio <= 1.0, "ratio must lie in [0, 1]"),
            (0.0 <= self.momentum < 1.0, "momentum must lie in [0, 1)"),
            (self.top_k >= 1, "top_k must be >= 1"),
            (self.width >= 1, "width must be >= 1"),
            (self.failing_split in ("train", "test"), "failing_split must be train or test"),
            (self.repetitions >= 1, "repetitions must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_params(cls, method: str, params: dict) -> "RepairConfig":
        """Build from a flat record; PSO keys may be bare (``swarm``) or dotted (``pso.swarm``)."""
        names = {f.name for f in dataclasses.fields(cls)}
        pso_names = {f.name for f in dataclasses.fields(PSOParams)}
        kwargs, pso = {}, {}
        for key, value in params.items():
            bare = key[4:] if key.startswith("pso.") else key
            if bare in pso_names and (key.startswith("pso.") or bare not in names):
                pso[bare] = value
            elif key in names and key != "method":
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown hyperparameter {key!r} for {method}")
        return cls(method=method, pso=PSOParams(**pso), **kwargs)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    def replace(self, **changes) -> "RepairConfig":
        return dataclasses.replace(self, **changes)


def constraint_or_default(spec: ConstraintSpec | None, num_classes: int) -> ConstraintSpec:
    from ..constraints import default_constraint

    return (spec or default_constraint(num_classes)).check(num_classes)
