"""Prediction harness, binary classification metrics, prediction-distribution
accounting, and prediction-bias collapse detection.

"Yes" is the positive class throughout. Zero-denominator metrics are defined
as 0. A model is collapsed on a dataset when the dominant class fraction
strictly exceeds the 0.95 threshold.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .model import ModelParams, YES_INDEX, forward_freq, frequency_matrix, softmax
from .textio import LABEL_NO, LABEL_YES, Example, TokenizeError, tokenize

COLLAPSE_THRESHOLD = 0.95
REPORT_SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "suite",
    "tp",
    "tn",
    "fp",
    "fn",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "yes_count",
    "no_count",
    "collapsed",
)


class EvaluationError(ValueError):
    """Empty inputs or mismatched prediction/label lengths."""


@dataclass(frozen=True)
class Prediction:
    label: str
    p_yes: float
    p_no: float


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class CollapseReport:
    yes_count: int
    no_count: int
    bias_fraction: float
    collapsed: bool
    dominant_class: str | None


@dataclass(frozen=True)
class SuiteResult:
    confusion: ConfusionMatrix
    metrics: Metrics
    collapse: CollapseReport
    skipped: int = 0


@dataclass(frozen=True)
class EvalReport:
    suites: dict[str, SuiteResult]
    aggregate: Metrics
    metadata: dict = field(default_factory=dict)


def predict_dataset(model: ModelParams, examples: list[Example]) -> list[Prediction | None]:
    """Deterministic argmax predictions, order preserved. Examples that fail
    tokenization come back as None (unpredictable)."""
    sequences: list[tuple[int, ...] | None] = []
    for ex in examples:
        try:
            sequences.append(tokenize(ex.premise, ex.hypothesis).ids)
        except TokenizeError:
            sequences.append(None)
    usable = [s for s in sequences if s is not None]
    predictions: list[Prediction | None] = [None] * len(examples)
    if usable:
        freq = frequency_matrix(usable)
        _, _, logits = forward_freq(model, freq)
        probs = softmax(logits)
        row = 0
        for i, seq in enumerate(sequences):
            if seq is None:
                continue
            p_yes = float(probs[row, YES_INDEX])
            label = LABEL_YES if p_yes > 0.5 else LABEL_NO
            predictions[i] = Prediction(label, p_yes, 1.0 - p_yes)
            row += 1
    return predictions


def compute_confusion(predictions: list[str], labels: list[str]) -> ConfusionMatrix:
    if len(predictions) != len(labels):
        raise EvaluationError(
            f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels"
        )
    tp = tn = fp = fn = 0
    for pred, label in zip(predictions, labels):
        if pred == LABEL_YES:
            if label == LABEL_YES:
                tp += 1
            else:
                fp += 1
        else:
            if label == LABEL_NO:
                tn += 1
            else:
                fn += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise EvaluationError("cannot compute metrics on an empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def detect_collapse(predictions: list[str], threshold: float = COLLAPSE_THRESHOLD) -> CollapseReport:
    """Collapsed iff the dominant class fraction strictly exceeds threshold."""
    if not predictions:
        raise EvaluationError("cannot detect collapse on empty predictions")
    yes = sum(1 for p in predictions if p == LABEL_YES)
    no = len(predictions) - yes
    bias = max(yes, no) / len(predictions)
    if yes > no:
        dominant = LABEL_YES
    elif no > yes:
        dominant = LABEL_NO
    else:
        dominant = None
    return CollapseReport(
        yes_count=yes,
        no_count=no,
        bias_fraction=bias,
        collapsed=bias > threshold,
        dominant_class=dominant,
    )


def evaluate_suite(model: ModelParams, examples: list[Example]) -> SuiteResult:
    if not examples:
        raise EvaluationError("cannot evaluate an empty suite")
    raw = predict_dataset(model, examples)
    pred_labels = [p.label for p in raw if p is not None]
    true_labels = [ex.label for ex, p in zip(examples, raw) if p is not None]
    skipped = len(examples) - len(pred_labels)
    if not pred_labels:
        raise EvaluationError("no predictable examples in suite")
    cm = compute_confusion(pred_labels, true_labels)
    return SuiteResult(
        confusion=cm,
        metrics=compute_metrics(cm),
        collapse=detect_collapse(pred_labels),
        skipped=skipped,
    )


def aggregate_metrics(suites: dict[str, SuiteResult]) -> Metrics:
    """Unweighted mean of each metric over suites."""
    if not suites:
        raise EvaluationError("no suites to aggregate")
    results = list(suites.values())
    n = len(results)
    return Metrics(
        accuracy=sum(r.metrics.accuracy for r in results) / n,
        precision=sum(r.metrics.precision for r in results) / n,
        recall=sum(r.metrics.recall for r in results) / n,
        f1=sum(r.metrics.f1 for r in results) / n,
    )


def evaluate_suites(
    model: ModelParams, suites: dict[str, list[Example]], metadata: dict | None = None
) -> EvalReport:
    results = {name: evaluate_suite(model, examples) for name, examples in suites.items()}
    return EvalReport(
        suites=results,
        aggregate=aggregate_metrics(results),
        metadata=dict(metadata or {}),
    )


def _suite_dict(result: SuiteResult) -> dict:
    return {
        "confusion": {
            "tp": result.confusion.tp,
            "tn": result.confusion.tn,
            "fp": result.confusion.fp,
            "fn": result.confusion.fn,
        },
        "metrics": {
            "accuracy": result.metrics.accuracy,
            "precision": result.metrics.precision,
            "recall": result.metrics.recall,
            "f1": result.metrics.f1,
        },
        "distribution": {
            "yes_count": result.collapse.yes_count,
            "no_count": result.collapse.no_count,
        },
        "collapse": {
            "bias_fraction": result.collapse.bias_fraction,
            "collapsed": result.collapse.collapsed,
            "dominant_class": result.collapse.dominant_class,
        },
        "skipped": result.skipped,
    }


def report_to_json(report: EvalReport) -> str:
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "suites": {name: _suite_dict(r) for name, r in sorted(report.suites.items())},
        "aggregate": {
            "accuracy": report.aggregate.accuracy,
            "precision": report.aggregate.precision,
            "recall": report.aggregate.recall,
            "f1": report.aggregate.f1,
        },
        "metadata": report.metadata,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> EvalReport:
    payload = json.loads(text)
    if payload.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise EvaluationError(f"unsupported report schema {payload.get('schema_version')!r}")
    suites: dict[str, SuiteResult] = {}
    for name, blob in payload["suites"].items():
        cm = ConfusionMatrix(**blob["confusion"])
        dist = blob["distribution"]
        collapse = CollapseReport(
            yes_count=dist["yes_count"],
            no_count=dist["no_count"],
            bias_fraction=blob["collapse"]["bias_fraction"],
            collapsed=blob["collapse"]["collapsed"],
            dominant_class=blob["collapse"]["dominant_class"],
        )
        suites[name] = SuiteResult(
            confusion=cm,
            metrics=Metrics(**blob["metrics"]),
            collapse=collapse,
            skipped=blob.get("skipped", 0),
        )
    agg = payload["aggregate"]
    return EvalReport(suites=suites, aggregate=Metrics(**agg), metadata=payload.get("metadata", {}))


def report_to_csv(report: EvalReport) -> str:
    """One row per suite plus an aggregate row (summed counts, mean metrics)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    total = ConfusionMatrix(
        tp=sum(r.confusion.tp for r in report.suites.values()),
        tn=sum(r.confusion.tn for r in report.suites.values()),
        fp=sum(r.confusion.fp for r in report.suites.values()),
        fn=sum(r.confusion.fn for r in report.suites.values()),
    )
    for name, r in sorted(report.suites.items()):
        writer.writerow(
            [
                name,
                r.confusion.tp,
                r.confusion.tn,
                r.confusion.fp,
                r.confusion.fn,
                f"{r.metrics.accuracy:.6f}",
                f"{r.metrics.precision:.6f}",
                f"{r.metrics.recall:.6f}",
                f"{r.metrics.f1:.6f}",
                r.collapse.yes_count,
                r.collapse.no_count,
                str(r.collapse.collapsed).lower(),
            ]
        )
    writer.writerow(
        [
            "aggregate",
            total.tp,
            total.tn,
            total.fp,
            total.fn,
            f"{report.aggregate.accuracy:.6f}",
            f"{report.aggregate.precision:.6f}",
            f"{report.aggregate.recall:.6f}",
            f"{report.aggregate.f1:.6f}",
            sum(r.collapse.yes_count for r in report.suites.values()),
            sum(r.collapse.no_count for r in report.suites.values()),
            "",
        ]
    )
    return buf.getvalue()


def emit_report(report: EvalReport, path: str, fmt: str) -> None:
    if fmt == "json":
        payload = report_to_json(report)
    elif fmt == "csv":
        payload = report_to_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(payload)
