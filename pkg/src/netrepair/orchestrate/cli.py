"""``netrepair`` entry point. Exit codes: 0 success, 1 usage error, 2 some runs failed."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..data import load_dataset
from ..defects import DEFECT_KINDS, DefectSpec, inject_defect
from ..model import parameterized_layers, supported_architectures
from ..store import load_model, save_model
from .config import (DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV, UsageError, _Parser, canonical_method, parse_cli,
                     parse_overrides)
from .pipeline import model_name_for, name_from_path, records_from_logs, run_pipeline, train_baseline
from .report import render_report

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

TRAIN_KEYS = {"epochs": int, "lr": float, "batch_size": int, "momentum": float, "width": int, "seed": int}


def _out_dir(value) -> Path:
    return Path(value or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def write_report(records, out_dir: Path, show_weight_patch_const: bool = False) -> str:
    text, table = render_report(records, show_weight_patch_const)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    (out_dir / "report.csv").write_text(table, encoding="utf-8")
    (out_dir / "records.json").write_text(json.dumps([r.to_json() for r in records], indent=1, default=str),
                                          encoding="utf-8")
    return text


def _train_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netrepair train-baseline", description="Train and save a baseline model.")
    p.add_argument("--all", nargs="?", const="true", default=None, metavar="ALL",
                   help="train every registry architecture")
    p.add_argument("--tool", metavar="TOOL", help="repair method the baseline is meant for (recorded)")
    p.add_argument("--net_arch", metavar="NETARCH")
    p.add_argument("--depth", type=int, metavar="DEPTH")
    p.add_argument("--dataset", metavar="DATASET", required=True)
    p.add_argument("--additional_param", nargs="+", action="extend", default=[], metavar="PARAM")
    p.add_argument("--saved_path", metavar="PATH")
    p.add_argument("--data_dir", default=None)
    return p


def train_baseline_main(argv) -> int:
    parser = _train_parser()
    ns = parser.parse_args(argv)
    everything = ns.all is not None and ns.all.lower() not in ("0", "false", "no")
    if ns.depth is not None and not ns.net_arch:
        raise UsageError("--depth needs --net_arch", parser.format_usage())
    if not everything and not (ns.net_arch and ns.depth is not None):
        raise UsageError("give --net_arch with --depth, or --all", parser.format_usage())
    params = parse_overrides(ns.additional_param)
    for key, value in params.items():
        if key not in TRAIN_KEYS:
            raise UsageError(f"unknown training parameter {key!r}; choose from {sorted(TRAIN_KEYS)}")
        try:
            params[key] = TRAIN_KEYS[key](value)
        except (TypeError, ValueError):
            raise UsageError(f"training parameter {key!r} expects {TRAIN_KEYS[key].__name__}") from None
    tool = canonical_method(ns.tool) if ns.tool else None
    seed = params.pop("seed", 0)
    data = load_dataset(ns.dataset, ns.data_dir, seed=seed)
    targets = supported_architectures() if everything else [(ns.net_arch, ns.depth)]
    for arch, depth in targets:
        model = train_baseline(arch, depth, data, seed=seed, tool=tool, **params)
        if ns.saved_path and not everything:
            path = Path(ns.saved_path)
        else:
            base = Path(ns.saved_path) if ns.saved_path else _out_dir(None)
            path = base / f"{model_name_for(ns.dataset, arch, depth)}_baseline.air"
        save_model(model, path)
        print(f"saved {path}  ({model.num_params()} parameters, "
              f"final loss {model.metadata['training']['loss_trace'][-1]:.4f})")
    return EXIT_OK


def _defect_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netrepair inject-defect", description="Corrupt a saved model reproducibly.")
    p.add_argument("--pretrained", required=True, metavar="PATH_AND_FILENAME")
    p.add_argument("--kind", required=True, choices=DEFECT_KINDS)
    p.add_argument("--layer", help="target layer (default: the last parameterized layer)")
    p.add_argument("--magnitude", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", help="needed for label-flip-finetune")
    p.add_argument("--data_dir", default=None)
    p.add_argument("--saved_path", metavar="PATH")
    return p


def inject_defect_main(argv) -> int:
    parser = _defect_parser()
    ns = parser.parse_args(argv)
    model = load_model(ns.pretrained)
    layer = ns.layer or parameterized_layers(model)[-1]
    train = None
    if ns.kind == "label-flip-finetune":
        if not ns.dataset:
            raise UsageError("label-flip-finetune needs --dataset", parser.format_usage())
        train = load_dataset(ns.dataset, ns.data_dir, seed=ns.seed).train
    defective = inject_defect(model, DefectSpec(ns.kind, layer, ns.magnitude, ns.seed), train)
    path = Path(ns.saved_path) if ns.saved_path else \
        Path(ns.pretrained).with_name(f"{name_from_path(ns.pretrained)}_defect.air")
    save_model(defective, path)
    print(f"saved {path}")
    return EXIT_OK


def repair_main(argv) -> int:
    config = parse_cli(argv)
    out_dir = Path(config.output_dir)
    if config.replay_only:
        records = records_from_logs(config.input_logs)
        if not records:
            print("no run records found in the given logs", file=sys.stderr)
            return EXIT_PARTIAL
    else:
        records = run_pipeline(config)
        if config.input_logs:
            records = records_from_logs(config.input_logs) + records
    text = write_report(records, out_dir, config.show_weight_patch_const)
    print(text, end="")
    failed = [r for r in records if r.status != "ok"]
    for r in failed:
        print(f"run {r.run_id} failed: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("NETREPAIR_LOG", "INFO"), format="%(levelname)s %(name)s: %(message)s")
    commands = {"train-baseline": train_baseline_main, "inject-defect": inject_defect_main}
    try:
        if argv and argv[0] in commands:
            return commands[argv[0]](argv[1:])
        return repair_main(argv)
    except UsageError as exc:
        if exc.usage:
            print(exc.usage, end="" if exc.usage.endswith("\n") else "\n", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
