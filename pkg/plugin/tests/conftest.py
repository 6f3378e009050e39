import random
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
CORPUS_DIR = REPO_ROOT / "tests" / "fixtures" / "corpus"

_DATA_TEMPLATES = [
    "The dataset for task {i} is at [URL] with splits.",
    "We publish the corpus {i} at [URL] for reuse.",
    "Benchmark {i} measurements live at [URL] today.",
]
_METHODS_TEMPLATES = [
    "Our code for study {i} is at [URL] under MIT.",
    "The toolkit {i} is maintained at [URL] now.",
    "Training scripts {i} are hosted at [URL] nightly.",
]
_SUPPLEMENT_TEMPLATES = [
    "Press coverage of result {i} appeared at [URL] yesterday.",
    "Slides for talk {i} are at [URL] online.",
    "The project news page {i} is at [URL] as well.",
]


def toy_examples(n_per_class=20, seed=99):
    rng = random.Random(seed)
    examples = []
    for i in range(n_per_class):
        examples.append({"url": f"https://host{i}.org/d",
                         "context": _DATA_TEMPLATES[i % 3].format(i=i),
                         "label": "data"})
        examples.append({"url": f"https://host{i}.org/m",
                         "context": _METHODS_TEMPLATES[i % 3].format(i=i),
                         "label": "methods"})
        examples.append({"url": f"https://host{i}.org/s",
                         "context": _SUPPLEMENT_TEMPLATES[i % 3].format(i=i),
                         "label": "supplement"})
    rng.shuffle(examples)
    return examples


@pytest.fixture()
def tiny_hyperparams():
    from linkcue.model import Hyperparams

    return Hyperparams(epochs=6, d_model=32, heads=4, layers=1,
                       feedforward=64, max_len=32)
