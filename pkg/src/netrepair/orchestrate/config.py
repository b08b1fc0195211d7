"""Command-line vocabulary and the validated run configuration."""

from __future__ import annotations

import argparse
import ast
import dataclasses
import os
from dataclasses import dataclass, field

from ..repair.config import METHODS, ConfigError, RepairConfig

OUTPUT_DIR_ENV = "NETREPAIR_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "netrepair_runs"

# the published tool names map onto the three strategy families
METHOD_ALIASES = {
    "apricot": "weight-patch",
    "deeprepair": "finetune-augment",
    "dl2": "extend-correct",
}


class UsageError(ValueError):
    """Bad command line; ``usage`` holds the parser's usage text."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


def canonical_method(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    key = METHOD_ALIASES.get(key, key)
    if key not in METHODS:
        known = sorted(set(METHODS) | set(METHOD_ALIASES))
        raise UsageError(f"unknown method {name!r}; choose from {', '.join(known)}")
    return key


def parse_value(text: str):
    """Python literal when it parses as one, else the raw string."""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        key = key.strip().lstrip("-")
        if not sep or not key or not value.strip():
            raise UsageError(f"malformed --additional_param {item!r}; expected key=value")
        out[key] = parse_value(value.strip())
    return out


def check_overrides(method: str, overrides: dict) -> None:
    """Raise UsageError when an override is unknown to the method or has the wrong type."""
    probe = RepairConfig(method)
    fields = {f.name: getattr(probe, f.name) for f in dataclasses.fields(RepairConfig)}
    pso = dataclasses.asdict(probe.pso)
    for key, value in overrides.items():
        bare = key[4:] if key.startswith("pso.") else key
        if bare in pso and (key.startswith("pso.") or bare not in fields):
            default = pso[bare]
        elif key in fields and key not in ("method", "pso"):
            default = fields[key]
        else:
            raise UsageError(f"unknown parameter {key!r} for {method}")
        if isinstance(default, bool) or default is None:
            continue
        if isinstance(default, int) and not (isinstance(value, int) and not isinstance(value, bool)):
            raise UsageError(f"parameter {key!r} expects an integer, got {value!r}")
        if isinstance(default, float) and not (isinstance(value, (int, float)) and not isinstance(value, bool)):
            raise UsageError(f"parameter {key!r} expects a number, got {value!r}")
        if isinstance(default, str) and not isinstance(value, str):
            raise UsageError(f"parameter {key!r} expects a string, got {value!r}")
    try:
        RepairConfig.from_params(method, overrides)
    except (ConfigError, TypeError) as exc:
        raise UsageError(f"invalid parameters for {method}: {exc}") from exc


@dataclass
class RunConfig:
    methods: list[str] = field(default_factory=list)
    net_arch: str | None = None
    depth: int | None = None
    dataset: str | None = None
    pretrained: str | None = None
    auto: bool = False
    overrides: dict = field(default_factory=dict)
    input_logs: list[str] = field(default_factory=list)
    testonly: bool = False
    all: bool = False
    seed: int = 0
    repetitions: int = 3
    output_dir: str = DEFAULT_OUTPUT_DIR
    data_dir: str | None = None
    workers: int = 1
    corruptions: list[str] = field(default_factory=list)
    show_weight_patch_const: bool = False
    baseline_epochs: int = 3

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.repetitions)]

    @property
    def replay_only(self) -> bool:
        return bool(self.input_logs) and not self.methods and not self.testonly and not self.all

    def validate(self) -> "RunConfig":
        if self.depth is not None and not self.net_arch:
            raise UsageError("--depth needs --net_arch: specify the model's architecture as well as depth")
        if self.repetitions < 1:
            raise UsageError("--repetitions must be >= 1")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if self.replay_only:
            return self
        if not self.dataset:
            raise UsageError("--dataset is required to evaluate or repair a model")
        if not (self.pretrained or self.all or self.net_arch):
            raise UsageError("give --pretrained, --net_arch with --depth, or --all")
        if self.net_arch and not self.pretrained and self.depth is None and not self.all:
            raise UsageError("training a fresh model needs --depth with --net_arch")
        if not self.testonly and not self.methods and not self.all:
            raise UsageError("no repair requested: give --method, --all or --testonly")
        for m in self.methods:
            check_overrides(m, self.overrides)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _usage_epilog() -> str:
    rows = "\n".join(f"  {alias:<12} -> {target}" for alias, target in METHOD_ALIASES.items())
    return ("method aliases:\n" + rows +
            "\n\nsubcommands:\n  train-baseline   train and save a baseline model"
            "\n  inject-defect    corrupt a saved model reproducibly"
            f"\n\nthe output directory defaults to ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netrepair", description="Repair trained classifiers and compare the methods.",
                epilog=_usage_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--all", action="store_true", help="every method on every registry model")
    p.add_argument("--net_arch", metavar="NETARCH")
    p.add_argument("--dataset", metavar="DATASET")
    p.add_argument("--pretrained", metavar="PATH_AND_FILENAME")
    p.add_argument("--depth", type=int, metavar="DEPTH")
    p.add_argument("--method", nargs="+", default=[], metavar="METHOD")
    p.add_argument("--auto", action="store_true", help="use the default parameters of each method")
    p.add_argument("--additional_param", nargs="+", action="extend", default=[], metavar="PARAM",
                   help="key=value pairs substituted into the defaults")
    p.add_argument("--input_logs", nargs="+", action="extend", default=[], metavar="INPUT_LOGS",
                   help="JSONL event logs to render into a report")
    p.add_argument("--testonly", action="store_true", help="evaluate without repairing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--output_dir", default=None)
    p.add_argument("--data_dir", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--corruptions", nargs="+", default=[], metavar="KINDSEV",
                   help="extra evaluation columns such as motion3 glass1")
    p.add_argument("--show_weight_patch_const", action="store_true")
    p.add_argument("--baseline_epochs", type=int, default=3)
    return p


def parse_cli(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(list(argv))
    try:
        cfg = RunConfig(
            methods=list(dict.fromkeys(canonical_method(m) for m in ns.method)),
            net_arch=ns.net_arch,
            depth=ns.depth,
            dataset=ns.dataset,
            pretrained=ns.pretrained,
            auto=ns.auto,
            overrides=parse_overrides(ns.additional_param),
            input_logs=list(ns.input_logs),
            testonly=ns.testonly,
            all=ns.all,
            seed=ns.seed,
            repetitions=ns.repetitions,
            output_dir=ns.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR,
            data_dir=ns.data_dir,
            workers=ns.workers,
            corruptions=list(ns.corruptions),
            show_weight_patch_const=ns.show_weight_patch_const,
            baseline_epochs=ns.baseline_epochs,
        )
        if cfg.all and not cfg.methods and not cfg.testonly:
            cfg.methods = list(METHODS)
        return cfg.validate()
    except UsageError as exc:
        exc.usage = exc.usage or parser.format_usage()
        raise
