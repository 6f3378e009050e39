import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"
TRUTH_PATH = FIXTURES / "corpus_truth.jsonl"
REPLAY_PATH = FIXTURES / "probes_replay.json"


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture(scope="session")
def corpus_truth():
    return read_jsonl(TRUTH_PATH)


@pytest.fixture(scope="session")
def corpus_papers():
    from paperlinks.ingest import load_metadata

    return load_metadata(CORPUS_DIR / "metadata.jsonl").papers


@pytest.fixture(scope="session")
def corpus_documents(corpus_papers):
    from paperlinks.ingest import parse_latex

    docs = []
    for paper in corpus_papers:
        source = (CORPUS_DIR / f"{paper.paper_id}.tex").read_text(encoding="utf-8")
        docs.append(parse_latex(source, paper.paper_id))
    return docs


@pytest.fixture(scope="session")
def corpus_mentions(corpus_documents):
    from paperlinks.extract import extract_mentions

    mentions = []
    for doc in corpus_documents:
        result = extract_mentions(doc)
        assert not result.rejected
        mentions.extend(result.mentions)
    return mentions
