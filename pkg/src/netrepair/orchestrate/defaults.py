"""Default hyperparameter rows used by ``--auto``."""

from __future__ import annotations

import logging

from ..model import REGISTRY, canonical_arch
from ..repair.config import METHODS

logger = logging.getLogger(__name__)

# the published finetune-augment block for ResNet on CIFAR
PUBLISHED_BLOCK = {"batch_size": 128, "lr": 0.1, "lam": 0.0, "extra": 128, "epoch": 60,
               "beta": 1.0, "cutmix_prob": 0.0, "ratio": 0.9}

# fallback rows, also the base every registered row starts from
FALLBACK = {
    "weight-patch": {"swarm": 32, "iters": 100, "inertia": 0.73, "c1": 1.49, "c2": 1.49,
                     "top_k": 32, "max_samples": 512},
    "finetune-augment": dict(PUBLISHED_BLOCK),
    "extend-correct": {"batch_size": 128, "lr": 0.01, "lam": 0.2, "epoch": 5, "width": 64},
}

DESK_DATASETS = ("synthetic", "toy", "mnist", "fashion-mnist")
CIFAR_DATASETS = ("cifar10", "cifar100")

# desk-scale adjustments for the small registry models
DESK_ROWS = {
    "weight-patch": {},
    "finetune-augment": {"lr": 0.01, "epoch": 5},
    "extend-correct": {},
}


def dataset_family(dataset: str) -> str:
    d = dataset.lower().replace("_", "-")
    if d in ("fmnist", "fashionmnist"):
        return "fashion-mnist"
    if d in ("cifar-10",):
        return "cifar10"
    if d in ("cifar-100",):
        return "cifar100"
    return d


def _table() -> dict:
    rows = {}
    archs = sorted({a for a, _ in REGISTRY})
    for method in METHODS:
        for arch in archs:
            for ds in DESK_DATASETS:
                rows[(method, arch, ds)] = {**FALLBACK[method], **DESK_ROWS[method]}
        for ds in CIFAR_DATASETS:
            rows[(method, "resnet", ds)] = dict(FALLBACK[method])
    return rows


DEFAULT_TABLE = _table()


def default_params(method: str, arch: str | None, dataset: str | None) -> dict:
    """Hyperparameter record for a (method, architecture, dataset) triple.

    Unregistered triples get the method's fallback row and a warning.
    """
    if method not in METHODS:
        raise ValueError(f"unknown repair method {method!r}")
    key = (method, canonical_arch(arch or ""), dataset_family(dataset or ""))
    row = DEFAULT_TABLE.get(key)
    if row is None:
        logger.warning("no default row for %s on %s/%s; using the %s fallback row",
                       method, arch, dataset, method)
        row = FALLBACK[method]
    return dict(row)


def resolve_params(method: str, arch, dataset, overrides: dict | None = None) -> dict:
    """Defaults with ``overrides`` substituted key by key."""
    params = default_params(method, arch, dataset)
    params.update(overrides or {})
    return params
