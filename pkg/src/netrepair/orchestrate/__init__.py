"""Command line, default parameters, repeated runs, event logs and reports."""

from .config import METHOD_ALIASES, OUTPUT_DIR_ENV, RunConfig, UsageError, canonical_method, parse_cli
from .defaults import PUBLISHED_BLOCK, default_params, resolve_params
from .events import EventLog, read_events, strip_volatile
from .pipeline import RunRecord, aggregate_outcomes, records_from_logs, run_pipeline, train_baseline
from .report import format_delta, format_percent, parse_cell, read_report_csv, render_report

__all__ = [
    "METHOD_ALIASES", "OUTPUT_DIR_ENV", "PUBLISHED_BLOCK", "EventLog", "RunConfig", "RunRecord", "UsageError",
    "aggregate_outcomes", "canonical_method", "default_params", "format_delta", "format_percent",
    "parse_cell", "parse_cli", "read_events", "read_report_csv", "records_from_logs", "render_report",
    "resolve_params", "run_pipeline", "strip_volatile", "train_baseline",
]
