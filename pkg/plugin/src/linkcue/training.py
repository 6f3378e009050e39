"""Seeded k-fold training driver and labeled-file loading."""

import json
import random

from .lexicon import LABELS
from .metrics import evaluate, mean_report
from .model import Hyperparams, TransformerModel


def load_labeled_file(path):
    """Line-delimited records {url, context, label}; labels outside the
    three-class vocabulary are an error naming the offending line."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                example = {
                    "url": str(rec["url"]),
                    "context": str(rec["context"]),
                    "label": str(rec["label"]).lower(),
                }
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: bad labeled record ({exc})") from exc
            if example["label"] not in LABELS:
                raise ValueError(
                    f"line {lineno}: label {example['label']!r} is not one of "
                    f"{'/'.join(LABELS)}")
            examples.append(example)
    return examples


def kfold_split(n, k, seed):
    """Shuffled contiguous folds whose sizes differ by at most one."""
    order = list(range(n))
    random.Random(seed).shuffle(order)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(order[start:start + size])
        start += size
    return folds


def kfold_train(examples, k, seed, hp=None, init_from=None):
    """Cross-validated training; returns (fold_reports, mean_report, model)
    where the model is retrained on the full set with the same seed."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(examples) < k:
        raise ValueError(f"need at least {k} examples for {k} folds")
    hp = hp or Hyperparams()
    folds = kfold_split(len(examples), k, seed)
    reports = []
    for i, fold in enumerate(folds):
        held_out = set(fold)
        train = [ex for j, ex in enumerate(examples) if j not in held_out]
        model = TransformerModel.train_on(train, seed + i, hp,
                                          init_from=init_from)
        test = [examples[j] for j in fold]
        predictions = [model.predict(ex["context"], ex["url"])[0] for ex in test]
        reports.append(evaluate(predictions, [ex["label"] for ex in test]))
    final = TransformerModel.train_on(examples, seed, hp, init_from=init_from)
    return reports, mean_report(reports), final
