"""Repair strategies behind one calling convention."""

from __future__ import annotations

from ..constraints import constraint_loss
from .augment import build_augmented_set
from .config import METHODS, ConfigError, PSOParams, RepairConfig
from .extend import PositionError, attach_correction_unit, repair_extend
from .finetune import repair_finetune
from .localize import Coordinate, LocalizationError, localize_faulty_weights
from .outcome import RepairOutcome
from .pso import PSOError, PSOResult, pso_optimize
from .weight_patch import repair_weight_patch

__all__ = [
    "METHODS", "ConfigError", "Coordinate", "LocalizationError", "PSOError", "PSOParams", "PSOResult",
    "PositionError", "RepairConfig", "RepairOutcome", "attach_correction_unit", "build_augmented_set",
    "constraint_loss", "localize_faulty_weights", "pso_optimize", "repair", "repair_extend",
    "repair_finetune", "repair_weight_patch",
]


def repair(model, data, config: RepairConfig, spec=None, emit=None, corruptions=()) -> RepairOutcome:
    if config.method == "weight-patch":
        return repair_weight_patch(model, data, config, spec, emit, corruptions)
    if config.method == "finetune-augment":
        return repair_finetune(model, data, config, spec, emit, corruptions)
    return repair_extend(model, data, spec, config, emit, corruptions)
