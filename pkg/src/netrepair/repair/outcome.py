from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..engine import predict
from ..evaluate import MetricsReport
from ..model import Model


@dataclass
class RepairOutcome:
    method: str
    model: Model
    before: MetricsReport
    after: MetricsReport
    fix_rate: float  # failing inputs now classified correctly
    retention: float  # passing inputs still classified correctly
    wall_clock_s: float
    peak_memory_bytes: int
    config: dict
    events: list = field(default_factory=list)
    status: str = "ok"

    def deltas(self) -> dict:
        b, a = self.before.to_record(), self.after.to_record()
        return {k: a[k] - b[k] for k in b if k in a}

    def summary(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "seed": self.config.get("seed"),
            "fix_rate": self.fix_rate,
            "retention": self.retention,
            "before": self.before.to_json(),
            "after": self.after.to_json(),
            "deltas": self.deltas(),
            "wall_clock_s": self.wall_clock_s,
            "peak_memory_bytes": self.peak_memory_bytes,
            "config": self.config,
        }


def fraction_correct(model: Model, dataset, empty_value: float = 1.0) -> float:
    """Accuracy on ``dataset``; ``empty_value`` when there is nothing to classify."""
    if dataset is None or len(dataset) == 0:
        return empty_value
    return float(np.mean(predict(model, dataset.images) == dataset.labels))


class EventSink:
    """Collects ``(event, payload)`` pairs and forwards them to an optional callback."""

    def __init__(self, emit: Callable[[str, dict], None] | None = None):
        self.emit_cb = emit
        self.events: list[dict] = []

    def __call__(self, event: str, payload: dict | None = None):
        payload = payload or {}
        self.events.append({"event": event, "payload": payload})
        if self.emit_cb is not None:
            self.emit_cb(event, payload)
