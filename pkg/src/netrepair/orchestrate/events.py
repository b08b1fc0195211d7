"""Append-only JSONL event log: one ``{ts, run_id, phase, event, payload}`` object per line."""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import numpy as np

VOLATILE_KEYS = frozenset({"ts", "elapsed_s", "wall_clock_s", "peak_memory_bytes", "samples",
                           "memory_available", "started", "finished", "resources"})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


class EventLog:
    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.events: list[dict] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, run_id: str, phase: str, event: str, payload: dict | None = None) -> dict:
        record = {"ts": time.time(), "run_id": run_id, "phase": phase, "event": event,
                  "payload": _jsonable(payload or {})}
        line = json.dumps(record, sort_keys=True)
        with self._lock:
            self.events.append(record)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line + "\n")
        return record

    def bind(self, run_id: str, phase: str):
        """Callback ``(event, payload)`` fixed to one run and phase."""
        return lambda event, payload=None: self.emit(run_id, phase, event, payload)


def read_events(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def strip_volatile(obj):
    """Drop timestamps and resource measurements, recursively."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj
