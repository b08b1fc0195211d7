from __future__ import annotations

import logging
from typing import Callable

from ..constraints import ConstraintSpec
from ..data import DatasetSplits, extract_failing_set
from ..evaluate import evaluate
from ..model import Model
from ..monitor import ResourceMonitor
from ..store import model_digest
from .config import RepairConfig, constraint_or_default
from .outcome import EventSink, RepairOutcome, fraction_correct

logger = logging.getLogger(__name__)


def run_repair(body: Callable, model: Model, data: DatasetSplits, config: RepairConfig,
               spec: ConstraintSpec | None, emit=None, corruptions=()) -> RepairOutcome:
    """Shared before/after bookkeeping around a strategy ``body``.

    ``body(model, failing, passing, sink)`` returns the repaired model, or a
    ``(model, status)`` pair.
    """
    spec = constraint_or_default(spec, model.num_classes)
    sink = EventSink(emit)
    with ResourceMonitor() as mon:
        before = evaluate(model, data.test, spec, corruptions, model_id=model_digest(model))
        split = data.test if config.failing_split == "test" else data.train
        failing, passing = extract_failing_set(model, split)
        sink("repair_start", {"method": config.method, "seed": config.seed,
                              "failing": len(failing), "passing": len(passing)})
        result = body(model, failing, passing, sink)
        repaired, status = result if isinstance(result, tuple) else (result, "ok")
        after = evaluate(repaired, data.test, spec, corruptions, model_id=model_digest(repaired))
        if status == "diverged":
            fix_rate = 0.0
        else:
            fix_rate = fraction_correct(repaired, failing, empty_value=1.0)
        retention = fraction_correct(repaired, passing, empty_value=1.0)
        sink("repair_end", {"fix_rate": fix_rate, "retention": retention, "status": status,
                            "acc": after.accuracy, "const_acc": after.constraint_accuracy})
    logger.info("%s seed=%d fix=%.4f retention=%.4f acc %.4f -> %.4f", config.method, config.seed,
                fix_rate, retention, before.accuracy, after.accuracy)
    return RepairOutcome(config.method, repaired, before, after, fix_rate, retention, mon.elapsed,
                         mon.peak_memory_bytes, config.to_dict(), sink.events, status)
