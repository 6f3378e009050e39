"""Plugin acceptance: wire conformance with the host pipeline and seeded
training determinism."""

import json
import sys
from pathlib import Path

from conftest import CORPUS_DIR, toy_examples
from linkcue.model import Hyperparams, save_lexicon_model
from linkcue.training import kfold_train

ASSETS = Path(__file__).parent / "assets"


def _ok(n, message):
    print(f"[acceptance] criterion {n:2d}: PASS: {message}")


def _fixture_mentions():
    from paperlinks.extract import extract_mentions
    from paperlinks.ingest import load_metadata, parse_latex

    load = load_metadata(CORPUS_DIR / "metadata.jsonl")
    mentions = []
    for paper in load.papers:
        source = (CORPUS_DIR / f"{paper.paper_id}.tex").read_text(encoding="utf-8")
        mentions.extend(extract_mentions(parse_latex(source, paper.paper_id)).mentions)
    return mentions


def _serialize(classified):
    return "".join(
        json.dumps({
            "canonical": cm.mention.normalized.canonical,
            "context": cm.mention.context_sentence,
            "label": cm.link_class.value,
            "confidence": cm.confidence,
        }) + "\n"
        for cm in classified
    )


def test_criterion_13_echo_plugin_conformance(tmp_path):
    from paperlinks.classify import (
        ExternalClassifier,
        classify_mentions_external,
        classify_mentions_lexicon,
    )

    mentions = _fixture_mentions()
    assert len(mentions) >= 60

    model_dir = tmp_path / "echo"
    save_lexicon_model(model_dir)
    command = [sys.executable, "-m", "linkcue.cli", "serve",
               "--model", str(model_dir)]
    with ExternalClassifier(command, idle_timeout=30) as ext:
        piped = classify_mentions_external(mentions, ext)
        assert ext.fallback_count == 0
    in_process = classify_mentions_lexicon(mentions)
    assert _serialize(piped).encode() == _serialize(in_process).encode()

    corrupt = [sys.executable, str(ASSETS / "corrupt_one_worker.py")]
    with ExternalClassifier(corrupt, idle_timeout=30) as ext:
        recovered = classify_mentions_external(mentions, ext)
        assert ext.fallback_count == 1
    assert recovered[0].classifier_id == "lexicon"
    assert recovered[0].link_class is in_process[0].link_class
    assert all(cm.classifier_id == "external" for cm in recovered[1:])
    _ok(13, f"echo plugin reproduced {len(mentions)} lexicon labels "
            "byte-identically; corrupted response caused exactly 1 fallback")


def test_criterion_14_training_determinism():
    examples = toy_examples(20)  # 60-example toy set
    assert len(examples) == 60
    hp = Hyperparams(epochs=6, d_model=32, heads=4, layers=1,
                     feedforward=64, max_len=32)
    folds_a, mean_a, _ = kfold_train(examples, 5, seed=7, hp=hp)
    folds_b, mean_b, _ = kfold_train(examples, 5, seed=7, hp=hp)
    assert folds_a == folds_b
    assert mean_a == mean_b
    assert set(mean_a) == {"accuracy", "macro_precision", "macro_recall",
                           "macro_f1", "per_class", "confusion", "n"}
    assert 0.0 <= mean_a["macro_f1"] <= 1.0
    _ok(14, f"two seeded 5-fold runs identical; mean macro-F1 "
            f"{mean_a['macro_f1']:.4f} in the shared report schema")
