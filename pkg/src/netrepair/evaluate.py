"""Accuracy, confusion accuracy and constraint accuracy, clean and under blur."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSpec, default_constraint, satisfied
from .data import CorruptionSpec, LabeledDataset, corrupt_batch
from .engine import predict_logits, softmax
from .model import Model

METRIC_FIELDS = ("acc", "const_acc", "conf_acc")


class EvaluationError(ValueError):
    pass


def confusion_matrix(preds, labels, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    m = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(m, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return m


def per_class_precision(matrix: np.ndarray) -> list[float | None]:
    """TP / (TP + FP) per class; ``None`` where the class is never predicted."""
    predicted = matrix.sum(axis=0)
    tp = np.diag(matrix)
    return [float(tp[c] / predicted[c]) if predicted[c] else None for c in range(matrix.shape[0])]


def confusion_accuracy_from_matrix(matrix: np.ndarray) -> float:
    """Macro mean of per-class precision over classes that are predicted at least once."""
    # exact rational mean, rounded once, so the value does not depend on summation order
    matrix = np.asarray(matrix)
    predicted = matrix.sum(axis=0)
    prec = [Fraction(int(matrix[c, c]), int(predicted[c])) for c in range(matrix.shape[0]) if predicted[c]]
    if not prec:
        raise EvaluationError("no class was ever predicted")
    return float(sum(prec) / len(prec))


def _need_samples(dataset: LabeledDataset):
    if len(dataset) == 0:
        raise EvaluationError("cannot evaluate on an empty dataset")


def accuracy(model: Model, dataset: LabeledDataset) -> float:
    _need_samples(dataset)
    preds = predict_logits(model, dataset.images).argmax(axis=1)
    return float(np.mean(preds == dataset.labels))


def confusion_accuracy(model: Model, dataset: LabeledDataset) -> float:
    _need_samples(dataset)
    preds = predict_logits(model, dataset.images).argmax(axis=1)
    return confusion_accuracy_from_matrix(confusion_matrix(preds, dataset.labels, model.num_classes))


def constraint_accuracy_from_probs(probs: np.ndarray, spec: ConstraintSpec) -> float:
    return float(np.mean(satisfied(probs, spec)))


def constraint_accuracy(model: Model, dataset: LabeledDataset, spec: ConstraintSpec | None = None) -> float:
    _need_samples(dataset)
    spec = (spec or default_constraint(model.num_classes)).check(model.num_classes)
    return constraint_accuracy_from_probs(softmax(predict_logits(model, dataset.images)), spec)


def metrics_from_logits(logits: np.ndarray, labels: np.ndarray, spec: ConstraintSpec) -> dict:
    preds = logits.argmax(axis=1)
    matrix = confusion_matrix(preds, labels, logits.shape[1])
    return {
        "acc": float(np.mean(preds == labels)),
        "const_acc": constraint_accuracy_from_probs(softmax(logits), spec),
        "conf_acc": confusion_accuracy_from_matrix(matrix),
        "precision": per_class_precision(matrix),
    }


@dataclass
class MetricsReport:
    accuracy: float
    constraint_accuracy: float
    confusion_accuracy: float
    per_class_precision: list
    sample_count: int
    per_corruption: dict = field(default_factory=dict)  # (kind, severity) -> {acc, const_acc, conf_acc}
    model_id: str = ""
    config_hash: str = ""

    def to_record(self) -> dict:
        """Flat ``acc``/``const_acc``/``conf_acc`` fields plus ``<field>@<kind><severity>`` variants."""
        rec = {"acc": self.accuracy, "const_acc": self.constraint_accuracy, "conf_acc": self.confusion_accuracy}
        for (kind, sev), vals in sorted(self.per_corruption.items()):
            for f in METRIC_FIELDS:
                rec[f"{f}@{kind}{sev}"] = vals[f]
        return rec

    def to_json(self) -> dict:
        return {
            **self.to_record(),
            "per_class_precision": self.per_class_precision,
            "sample_count": self.sample_count,
            "per_corruption": [{"kind": k, "severity": s, **v} for (k, s), v in sorted(self.per_corruption.items())],
            "model_id": self.model_id,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MetricsReport":
        per = {(e["kind"], int(e["severity"])): {f: e[f] for f in METRIC_FIELDS} for e in d.get("per_corruption", [])}
        return cls(d["acc"], d["const_acc"], d["conf_acc"], d.get("per_class_precision", []),
                   d.get("sample_count", 0), per, d.get("model_id", ""), d.get("config_hash", ""))

    def csv_header(self) -> list[str]:
        return ["model_id", "config_hash", "sample_count", *self.to_record()]

    def csv_row(self) -> list[str]:
        return [self.model_id, self.config_hash, str(self.sample_count),
                *(repr(float(v)) for v in self.to_record().values())]


def config_hash(spec: ConstraintSpec, corruptions) -> str:
    payload = json.dumps({"constraint": spec.to_dict(),
                          "corruptions": [[c.kind, c.severity, c.seed] for c in corruptions]}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def evaluate(model: Model, dataset: LabeledDataset, spec: ConstraintSpec | None = None,
             corruptions=(), model_id: str = "") -> MetricsReport:
    """Clean metrics plus one metric triple per requested (kind, severity)."""
    _need_samples(dataset)
    if dataset.class_count != model.num_classes:
        raise EvaluationError(f"dataset has {dataset.class_count} classes, model {model.num_classes}")
    spec = (spec or default_constraint(model.num_classes)).check(model.num_classes)
    corruptions = list(corruptions)
    clean_logits = predict_logits(model, dataset.images)
    clean = metrics_from_logits(clean_logits, dataset.labels, spec)
    per = {}
    for c in corruptions:
        logits = clean_logits if c.severity == 0 else predict_logits(model, corrupt_batch(dataset.images, c))
        m = metrics_from_logits(logits, dataset.labels, spec)
        per[(c.kind, c.severity)] = {f: m[f] for f in METRIC_FIELDS}
    return MetricsReport(clean["acc"], clean["const_acc"], clean["conf_acc"], clean["precision"],
                         len(dataset), per, model_id, config_hash(spec, corruptions))


def parse_corruptions(items, seed: int = 0) -> list[CorruptionSpec]:
    """``["motion3", "glass:2", ...]`` -> CorruptionSpec list."""
    out = []
    for item in items:
        item = item.replace(":", "").replace("@", "")
        kind = item.rstrip("0123456789")
        sev = item[len(kind):]
        if not sev:
            raise EvaluationError(f"corruption {item!r} needs a severity, e.g. motion3")
        out.append(CorruptionSpec(kind, int(sev), seed))
    return out
