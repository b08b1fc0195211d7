"""Comparison table: absolute baseline percentages and signed per-method deltas."""

from __future__ import annotations

import csv
import io

MINUS = "−"
CSV_SCHEMA = "netrepair-report/1"
CSV_COLUMNS = ["schema", "row", "method", "metric", "model", "value", "cell", "best"]
ACC_MARK, CONST_MARK = "*", "^"
METRIC_LABELS = {"acc": "Acc.", "const_acc": "Const."}


def format_percent(fraction: float) -> str:
    return f"{fraction * 100:.2f}%"


def format_delta(delta: float) -> str:
    """``+0.50%`` / ``−9.46%`` (U+2212); values that round to zero print as ``+0.00%``."""
    text = f"{delta * 100:+.2f}"
    if text in ("-0.00", "+0.00"):
        text = "+0.00"
    return text.replace("-", MINUS) + "%"


def parse_cell(cell: str) -> float:
    """Inverse of the two formatters; returns a fraction."""
    text = cell.strip().replace(MINUS, "-").rstrip("%")
    return float(text) / 100.0


def _view(record) -> dict:
    """Accept RunRecord objects or their JSON form."""
    return record.to_json() if hasattr(record, "to_json") else record


def _best(values: list) -> int | None:
    """Index of the largest non-None value; ties go to the earliest."""
    best = None
    for i, v in enumerate(values):
        if v is not None and (best is None or v > values[best]):
            best = i
    return best


def report_rows(records, show_weight_patch_const: bool = False):
    """Cells as ``(row, method, metric, model, value, cell, best)`` tuples plus the model order."""
    views = [_view(r) for r in records]
    if not views:
        raise ValueError("render_report needs at least one record")
    models = list(dict.fromkeys(v["model_name"] for v in views))
    methods = list(dict.fromkeys(v["method"] for v in views if v.get("method")))
    baseline = {}
    for v in views:
        if v.get("before") and v["model_name"] not in baseline:
            baseline[v["model_name"]] = v["before"]
    cells = []
    for metric in ("acc", "const_acc"):
        for model in models:
            before = baseline.get(model)
            value = before.get(metric) if before else None
            cells.append(("baseline", "", metric, model, value,
                          format_percent(value) if value is not None else "n/a", False))

    def shown(method, metric):
        return metric == "acc" or method != "weight-patch" or show_weight_patch_const

    lookup = {(v["model_name"], v["method"]): v for v in views if v.get("method")}
    for metric in ("acc", "const_acc"):
        for model in models:
            candidates = [m for m in methods if shown(m, metric)]
            values = []
            for m in candidates:
                v = lookup.get((model, m))
                ok = v is not None and v.get("status") == "ok"
                values.append(v["aggregate"]["deltas"].get(metric) if ok else None)
            best = _best(values)
            for i, m in enumerate(candidates):
                v = lookup.get((model, m))
                if v is None:
                    cell = ""
                elif values[i] is None:
                    cell = "failed" if v.get("status") != "ok" else "n/a"
                else:
                    cell = format_delta(values[i])
                cells.append(("method", m, metric, model, values[i], cell, i == best))
    return cells, models, methods


def render_report(records, show_weight_patch_const: bool = False) -> tuple[str, str]:
    """Text table and CSV for completed run records."""
    cells, models, methods = report_rows(records, show_weight_patch_const)
    by_key = {(c[0], c[1], c[2], c[3]): c for c in cells}

    lines = []
    row_labels = [("baseline", "", "acc", "Baseline Acc."), ("baseline", "", "const_acc", "Baseline Const.")]
    for m in methods:
        for metric in ("acc", "const_acc"):
            if any((("method", m, metric, model) in by_key) for model in models):
                row_labels.append(("method", m, metric, f"{m} {METRIC_LABELS[metric]}"))
    label_w = max(len(r[3]) for r in row_labels)
    col_w = max([len(m) for m in models] + [12])
    lines.append(" " * label_w + "  " + "  ".join(m.rjust(col_w) for m in models))
    for row, method, metric, label in row_labels:
        parts = []
        for model in models:
            c = by_key.get((row, method, metric, model))
            text = "" if c is None else c[5]
            if c is not None and c[6]:
                text += " " + (ACC_MARK if metric == "acc" else CONST_MARK)
            elif c is not None and row == "method":
                text += "  "
            parts.append(text.rjust(col_w))
        lines.append(label.ljust(label_w) + "  " + "  ".join(parts))
    lines.append("")
    lines.append(f"{ACC_MARK} best accuracy delta per model, {CONST_MARK} best constraint-accuracy delta per model")
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row, method, metric, model, value, cell, best in cells:
        w.writerow([CSV_SCHEMA, row, method, metric, model,
                    "" if value is None else f"{value:.10f}", cell, int(bool(best))])
    return text, buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        if r["schema"] != CSV_SCHEMA:
            raise ValueError(f"unsupported report schema {r['schema']!r}")
        r["value"] = float(r["value"]) if r["value"] else None
        r["best"] = r["best"] == "1"
    return rows
