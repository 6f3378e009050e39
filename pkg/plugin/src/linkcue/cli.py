"""linkcue command line: init-lexicon, train, evaluate, serve."""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .model import Hyperparams, load_model, save_lexicon_model, save_model
from .protocol import serve
from .training import kfold_train, load_labeled_file


def _add_hyperparam_args(parser):
    defaults = Hyperparams()
    for field in fields(Hyperparams):
        parser.add_argument(
            f"--{field.name.replace('_', '-')}", type=field.type,
            default=getattr(defaults, field.name))


def _hyperparams_from(args):
    return Hyperparams(**{
        field.name: getattr(args, field.name) for field in fields(Hyperparams)})


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="linkcue",
        description="URL-mention classifier worker over stdin/stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init-lexicon",
                            help="write a lexicon (echo) model directory")
    p_init.add_argument("model_dir")

    p_train = sub.add_parser("train", help="k-fold train a transformer model")
    p_train.add_argument("--data", required=True,
                         help="line-delimited {url, context, label} records")
    p_train.add_argument("--out", required=True, help="model output directory")
    p_train.add_argument("--k", type=int, default=10)
    p_train.add_argument("--seed", type=int, default=7)
    p_train.add_argument("--init-from", default=None,
                         help="checkpoint directory to fine-tune from")
    _add_hyperparam_args(p_train)

    p_eval = sub.add_parser("evaluate", help="score a model on labeled data")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)

    p_serve = sub.add_parser("serve", help="answer protocol requests on stdin")
    p_serve.add_argument("--model", required=True)

    args = parser.parse_args(argv)

    if args.command == "init-lexicon":
        save_lexicon_model(args.model_dir)
        print(f"lexicon model written to {args.model_dir}")
        return 0

    if args.command == "train":
        try:
            examples = load_labeled_file(args.data)
            folds, mean, model = kfold_train(
                examples, args.k, args.seed, _hyperparams_from(args),
                init_from=args.init_from)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        save_model(model, args.out)
        metrics = {"folds": folds, "mean": mean, "k": args.k, "seed": args.seed}
        metrics_path = Path(args.out) / "metrics.json"
        metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True)
                                + "\n", encoding="utf-8")
        print(json.dumps({"mean_macro_f1": mean["macro_f1"],
                          "mean_accuracy": mean["accuracy"],
                          "metrics": str(metrics_path)}))
        return 0

    if args.command == "evaluate":
        from .metrics import evaluate as score

        try:
            model = load_model(args.model)
            examples = load_labeled_file(args.data)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        predictions = [model.predict(ex["context"], ex["url"])[0]
                       for ex in examples]
        print(json.dumps(score(predictions, [ex["label"] for ex in examples]),
                         sort_keys=True))
        return 0

    if args.command == "serve":
        try:
            model = load_model(args.model)
        except (OSError, ValueError, KeyError) as exc:
            # refuse to accept input with a broken model
            print(f"error: cannot load model: {exc}", file=sys.stderr)
            return 2
        serve(model)
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
