"""Evaluate, repair over seeded repetitions, aggregate and log every (model, method) run."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import load_dataset
from ..engine import train_epochs
from ..evaluate import evaluate, parse_corruptions
from ..model import Model, build_architecture, canonical_arch, supported_architectures
from ..monitor import ResourceMonitor
from ..repair import RepairConfig, repair
from ..store import load_model, model_digest, save_model
from .config import RunConfig
from .defaults import resolve_params
from .events import EventLog, read_events

logger = logging.getLogger(__name__)

PROGRESS_EVENTS = ("epoch", "pso_iteration", "repair_end")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunRecord:
    run_id: str
    model_name: str
    method: str | None
    config: dict
    params: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)  # RepairOutcome objects, in memory only
    repetitions: list = field(default_factory=list)  # per-repetition summaries
    before: dict | None = None
    aggregate: dict = field(default_factory=dict)
    resources: dict = field(default_factory=dict)
    model_files: list = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    started: str = ""
    finished: str = ""

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id, "model_name": self.model_name, "method": self.method,
            "config": self.config, "params": self.params, "seeds": self.seeds,
            "repetitions": self.repetitions, "before": self.before, "aggregate": self.aggregate,
            "resources": self.resources, "model_files": self.model_files, "status": self.status,
            "error": self.error, "started": self.started, "finished": self.finished,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        keys = set(cls.__dataclass_fields__) - {"outcomes"}
        return cls(**{k: v for k, v in d.items() if k in keys})


def aggregate_outcomes(outcomes) -> dict:
    """Arithmetic mean over repetitions of every after-metric, the deltas, fix rate and retention."""
    if not outcomes:
        return {}
    afters = [o.after.to_record() for o in outcomes]
    before = outcomes[0].before.to_record()
    keys = [k for k in afters[0] if all(k in a for a in afters)]
    after = {k: float(np.mean([a[k] for a in afters])) for k in keys}
    return {
        "after": after,
        "deltas": {k: after[k] - before[k] for k in keys if k in before},
        "fix_rate": float(np.mean([o.fix_rate for o in outcomes])),
        "retention": float(np.mean([o.retention for o in outcomes])),
        "count": len(outcomes),
    }


def train_baseline(arch: str, depth: int, data, seed: int = 0, epochs: int = 3, lr: float = 0.05,
                   batch_size: int = 128, momentum: float = 0.9, width=None, tool: str | None = None) -> Model:
    model = build_architecture(arch, depth, data.train.shape, data.train.class_count, seed=seed, width=width)
    trained, trace = train_epochs(model, data.train, epochs, batch_size, lr, seed, momentum)
    trained.metadata["training"] = {"dataset": data.name, "epochs": epochs, "lr": lr, "batch_size": batch_size,
                                    "momentum": momentum, "seed": seed, "loss_trace": trace}
    if tool:
        trained.metadata["training"]["tool"] = tool
    return trained


def model_name_for(dataset: str, arch: str, depth: int) -> str:
    return f"{dataset}_{canonical_arch(arch)}{depth}"


def name_from_path(path) -> str:
    stem = Path(path).stem
    for suffix in ("_baseline", "_defect"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def repaired_path(out_dir: Path, name: str, method: str, repetition: int) -> Path:
    rep = "" if repetition == 0 else f".rep{repetition}"
    return out_dir / f"{name}_repaired_{method}{rep}.air"


def _obtain(config: RunConfig, data, arch: str, depth: int, out_dir: Path) -> tuple[str, Model]:
    name = model_name_for(config.dataset, arch, depth)
    path = out_dir / f"{name}_baseline.air"
    if path.exists():
        return name, load_model(path)
    model = train_baseline(arch, depth, data, config.seed, epochs=config.baseline_epochs)
    save_model(model, path)
    return name, model


def resolve_models(config: RunConfig, data, out_dir: Path) -> list[tuple[str, Model]]:
    if config.pretrained:
        model = load_model(config.pretrained)
        if config.net_arch and canonical_arch(config.net_arch) != canonical_arch(model.arch_name):
            raise ValueError(f"{config.pretrained} holds a {model.arch_name} model, not {config.net_arch}")
        if config.depth is not None and config.depth != model.depth:
            raise ValueError(f"{config.pretrained} has depth {model.depth}, not {config.depth}")
        return [(name_from_path(config.pretrained), model)]
    if config.all:
        return [_obtain(config, data, a, d, out_dir) for a, d in supported_architectures()]
    return [_obtain(config, data, config.net_arch, config.depth, out_dir)]


def _run_id(name: str, method: str | None, config: RunConfig, params: dict) -> str:
    blob = json.dumps({"params": params, "seeds": config.seeds, "dataset": config.dataset,
                       "corruptions": config.corruptions}, sort_keys=True, default=str)
    return f"{name}:{method or 'testonly'}:{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


def _echo(config: RunConfig) -> dict:
    d = config.to_dict()
    d.pop("output_dir", None)
    d.pop("workers", None)
    return d


class Pipeline:
    def __init__(self, config: RunConfig, data=None):
        self.config = config
        self.out_dir = Path(config.output_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log = EventLog(self.out_dir / "events.jsonl")
        self.data = data
        self.corruptions = parse_corruptions(config.corruptions, config.seed) if config.corruptions else []

    def _emitter(self, run_id: str, phase: str, repetition: int | None = None):
        def emit(event, payload=None):
            payload = dict(payload or {})
            if repetition is not None:
                payload["repetition"] = repetition
            if event in PROGRESS_EVENTS:
                logger.info("%s %s %s", run_id, event, {k: v for k, v in payload.items() if k != "trace"})
            self.log.emit(run_id, phase, event, payload)
        return emit

    def evaluate_only(self, name: str, model: Model) -> RunRecord:
        run_id = _run_id(name, None, self.config, {})
        rec = RunRecord(run_id, name, None, _echo(self.config), started=_now())
        self.log.emit(run_id, "setup", "run_start", {"model": name, "testonly": True})
        with ResourceMonitor() as mon:
            report = evaluate(model, self.data.test, corruptions=self.corruptions, model_id=model_digest(model))
        rec.before = report.to_record()
        rec.resources = mon.summary()
        rec.finished = _now()
        self.log.emit(run_id, "evaluate", "metrics", {"before": report.to_json()})
        self.log.emit(run_id, "report", "run_record", rec.to_json())
        return rec

    def repair_run(self, name: str, model: Model, method: str) -> RunRecord:
        cfg = self.config
        params = resolve_params(method, model.arch_name, cfg.dataset, cfg.overrides)
        run_id = _run_id(name, method, cfg, params)
        rec = RunRecord(run_id, name, method, _echo(cfg), params=params, seeds=cfg.seeds, started=_now())
        self.log.emit(run_id, "setup", "run_start", {"model": name, "method": method, "params": params,
                                                     "seeds": cfg.seeds, "auto": cfg.auto})
        try:
            with ResourceMonitor() as mon:
                for rep, seed in enumerate(cfg.seeds):
                    config = RepairConfig.from_params(method, {**params, "seed": seed})
                    outcome = repair(model, self.data, config, emit=self._emitter(run_id, "repair", rep),
                                     corruptions=self.corruptions)
                    path = repaired_path(self.out_dir, name, method, rep)
                    save_model(outcome.model, path)
                    rec.outcomes.append(outcome)
                    rec.repetitions.append(outcome.summary())
                    rec.model_files.append(path.name)
                    self.log.emit(run_id, "repair", "repetition_done",
                                  {"repetition": rep, "file": path.name, **outcome.summary()})
            rec.resources = mon.summary()
            rec.before = rec.outcomes[0].before.to_record()
            rec.aggregate = aggregate_outcomes(rec.outcomes)
            self.log.emit(run_id, "aggregate", "aggregate", rec.aggregate)
        except Exception as exc:  # one failed run must not stop the others
            logger.exception("run %s failed", run_id)
            rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
            rec.aggregate = {}
            self.log.emit(run_id, "repair", "run_failed", {"error": rec.error})
        rec.finished = _now()
        self.log.emit(run_id, "report", "run_record", rec.to_json())
        return rec

    def run(self) -> list[RunRecord]:
        cfg = self.config
        if self.data is None:
            self.data = load_dataset(cfg.dataset, cfg.data_dir, seed=cfg.seed)
        models = resolve_models(cfg, self.data, self.out_dir)
        if cfg.testonly:
            jobs = [(self.evaluate_only, (name, model)) for name, model in models]
        else:
            jobs = [(self.repair_run, (name, model, m)) for name, model in models for m in cfg.methods]
        if cfg.workers == 1 or len(jobs) <= 1:
            return [fn(*args) for fn, args in jobs]
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(fn, *args) for fn, args in jobs]
            return [f.result() for f in futures]


def run_pipeline(config: RunConfig, data=None) -> list[RunRecord]:
    """All (model, method) runs of ``config``; ``data`` overrides dataset loading."""
    return Pipeline(config, data).run()


def records_from_logs(paths) -> list[RunRecord]:
    """Rebuild run records from JSONL event logs (latest record per run id wins)."""
    latest: dict[str, dict] = {}
    for path in paths:
        for ev in read_events(path):
            if ev.get("event") == "run_record":
                latest[ev["run_id"]] = ev["payload"]
    return [RunRecord.from_json(p) for p in latest.values()]
