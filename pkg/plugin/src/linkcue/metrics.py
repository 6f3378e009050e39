"""Evaluation in the shared report schema used by the host pipeline.

The dict shape (accuracy, macro_*, per_class, confusion, n) matches the
pipeline's EvalReport export so fold metrics from training runs can be
compared or merged directly.
"""

from .lexicon import LABELS


def evaluate(predictions, gold):
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold must have equal length")
    if not gold:
        raise ValueError("cannot evaluate an empty label set")
    index = {label: i for i, label in enumerate(LABELS)}
    confusion = [[0] * 3 for _ in range(3)]
    for pred, g in zip(predictions, gold):
        confusion[index[g]][index[pred]] += 1
    per_class = {}
    for i, label in enumerate(LABELS):
        tp = confusion[i][i]
        predicted = sum(confusion[r][i] for r in range(3))
        actual = sum(confusion[i])
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        per_class[label] = {"precision": precision, "recall": recall, "f1": f1}
    n = len(gold)
    return {
        "accuracy": sum(confusion[i][i] for i in range(3)) / n,
        "macro_precision": sum(v["precision"] for v in per_class.values()) / 3,
        "macro_recall": sum(v["recall"] for v in per_class.values()) / 3,
        "macro_f1": sum(v["f1"] for v in per_class.values()) / 3,
        "per_class": per_class,
        "confusion": confusion,
        "n": n,
    }


def mean_report(reports):
    """Fold metrics averaged unweighted; confusions summed."""
    k = len(reports)
    return {
        "accuracy": sum(r["accuracy"] for r in reports) / k,
        "macro_precision": sum(r["macro_precision"] for r in reports) / k,
        "macro_recall": sum(r["macro_recall"] for r in reports) / k,
        "macro_f1": sum(r["macro_f1"] for r in reports) / k,
        "per_class": {
            label: {
                metric: sum(r["per_class"][label][metric] for r in reports) / k
                for metric in ("precision", "recall", "f1")
            }
            for label in LABELS
        },
        "confusion": [
            [sum(r["confusion"][i][j] for r in reports) for j in range(3)]
            for i in range(3)
        ],
        "n": sum(r["n"] for r in reports),
    }
