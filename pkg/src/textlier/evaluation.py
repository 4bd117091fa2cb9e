"""Confusion matrix, precision/recall/F1 and report rendering.

The positive class is label 1 (outlier). Degenerate denominators yield 0
with a flag instead of raising, so batch evaluation never aborts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import StateError


@dataclass
class ConfusionMatrix:
    """Rows = true class (0 then 1), columns = predicted (0 then 1)."""

    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def n_samples(self) -> int:
        return self.tn + self.fp + self.fn + self.tp


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    precision: float
    recall: float
    f1: float
    n_samples: int
    degenerate: bool = False

    def to_json(self) -> str:
        cm = self.confusion
        return json.dumps({
            "n_samples": self.n_samples,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": {"tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "tp": cm.tp},
            "degenerate": self.degenerate,
        }, indent=2)

    def to_table(self, item: str = "dataset") -> str:
        """Aligned plain-text table with the same columns as the paper-style
        results table: sample count, F1, precision, recall, confusion matrix."""
        cm = self.confusion
        headers = ["Item", "Samples", "F1", "Precision", "Recall", "Confusion"]
        row = [item, str(self.n_samples), f"{self.f1:.8f}",
               f"{self.precision:.8f}", f"{self.recall:.8f}",
               f"[[{cm.tn}, {cm.fp}], [{cm.fn}, {cm.tp}]]"]
        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        return fmt.format(*headers) + "\n" + fmt.format(*row) + "\n"


def confusion(labels: list[int], predictions: list[int]) -> ConfusionMatrix:
    if len(labels) != len(predictions):
        raise ValueError(
            f"labels ({len(labels)}) and predictions ({len(predictions)}) differ")
    if not labels:
        raise ValueError("empty inputs")
    tn = fp = fn = tp = 0
    for t, p in zip(labels, predictions):
        if t not in (0, 1) or p not in (0, 1):
            raise ValueError(f"labels/predictions must be 0/1, got ({t}, {p})")
        if t == 0:
            if p == 0:
                tn += 1
            else:
                fp += 1
        else:
            if p == 0:
                fn += 1
            else:
                tp += 1
    return ConfusionMatrix(tn=tn, fp=fp, fn=fn, tp=tp)


def metrics(cm: ConfusionMatrix) -> EvalReport:
    degenerate = False
    if cm.tp + cm.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = cm.tp / (cm.tp + cm.fp)
    if cm.tp + cm.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = cm.tp / (cm.tp + cm.fn)
    if precision + recall == 0:
        f1 = 0.0
        # tp=0 with both denominators non-zero is a real zero score, not a
        # degenerate case
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return EvalReport(confusion=cm, precision=precision, recall=recall, f1=f1,
                      n_samples=cm.n_samples, degenerate=degenerate)


def evaluate_predictions(labels: list[int], predictions: list[int]) -> EvalReport:
    return metrics(confusion(labels, predictions))


def evaluate_pipeline(bundle, split, partition: str) -> EvalReport:
    """Featurize -> predict -> metrics over one partition of a split.

    `bundle` is a trained PipelineBundle (autoencoder + logistic model).
    """
    from .autoencoder import featurize
    from .classifier import predict

    docs = split.partition(partition)
    if not docs:
        raise ValueError(f"partition {partition!r} is empty")
    if bundle.autoencoder is None or bundle.classifier is None:
        raise StateError("pipeline bundle is not trained")
    labels = [d.label for d in docs]
    preds = [predict(bundle.classifier,
                     featurize(bundle.autoencoder, d).payload())
             for d in docs]
    return evaluate_predictions(labels, preds)
