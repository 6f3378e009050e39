import json

import pytest

from conftest import toy_examples
from linkcue.metrics import evaluate, mean_report
from linkcue.model import TransformerModel, load_model, save_model
from linkcue.training import kfold_split, kfold_train, load_labeled_file


class TestLabeledFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "labeled.jsonl"
        examples = toy_examples(2)
        path.write_text("".join(json.dumps(ex) + "\n" for ex in examples),
                        encoding="utf-8")
        assert load_labeled_file(path) == examples

    def test_bad_label_names_line(self, tmp_path):
        path = tmp_path / "labeled.jsonl"
        path.write_text(
            '{"url": "http://x.org", "context": "c", "label": "data"}\n'
            '{"url": "http://x.org", "context": "c", "label": "banana"}\n',
            encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            load_labeled_file(path)


class TestKFold:
    def test_fold_sizes(self):
        assert sorted(len(f) for f in kfold_split(10, 2, seed=1)) == [5, 5]
        assert sorted(len(f) for f in kfold_split(11, 10, seed=1)) == [1] * 9 + [2]

    def test_split_deterministic(self):
        assert kfold_split(60, 5, seed=3) == kfold_split(60, 5, seed=3)

    def test_too_few_examples(self, tiny_hyperparams):
        with pytest.raises(ValueError):
            kfold_train(toy_examples(1), 10, seed=1, hp=tiny_hyperparams)


class TestMetricsSchema:
    def test_evaluate_shape(self):
        report = evaluate(["data", "methods"], ["data", "supplement"])
        assert set(report) == {"accuracy", "macro_precision", "macro_recall",
                               "macro_f1", "per_class", "confusion", "n"}
        assert set(report["per_class"]) == {"data", "methods", "supplement"}
        assert report["n"] == 2

    def test_mean_report(self):
        a = evaluate(["data"], ["data"])
        b = evaluate(["methods"], ["data"])
        mean = mean_report([a, b])
        assert mean["accuracy"] == 0.5
        assert mean["n"] == 2


class TestTransformerTraining:
    def test_save_load_roundtrip_predictions(self, tmp_path, tiny_hyperparams):
        examples = toy_examples(6)
        model = TransformerModel.train_on(examples, seed=5, hp=tiny_hyperparams)
        save_model(model, tmp_path / "model")
        loaded = load_model(tmp_path / "model")
        for ex in examples[:10]:
            assert loaded.predict(ex["context"], ex["url"]) == \
                model.predict(ex["context"], ex["url"])

    def test_fine_tune_from_checkpoint(self, tmp_path, tiny_hyperparams):
        base = TransformerModel.train_on(toy_examples(4), seed=5,
                                         hp=tiny_hyperparams)
        save_model(base, tmp_path / "base")
        tuned = TransformerModel.train_on(
            toy_examples(6, seed=123), seed=6, hp=tiny_hyperparams,
            init_from=tmp_path / "base")
        assert tuned.vocab == base.vocab  # fine-tuning keeps the vocabulary
        label, confidence = tuned.predict("our code at [URL]", "http://h.org/m")
        assert label in ("data", "methods", "supplement")
        assert 0.0 <= confidence <= 1.0

    def test_learns_the_toy_task(self):
        from linkcue.model import Hyperparams

        examples = toy_examples(20)
        hp = Hyperparams(epochs=12, d_model=32, heads=4, layers=1,
                         feedforward=64, max_len=32)
        _, mean, _ = kfold_train(examples, 3, seed=7, hp=hp)
        assert mean["macro_f1"] > 0.8
