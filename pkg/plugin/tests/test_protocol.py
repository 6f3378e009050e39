import io
import json
import subprocess
import sys

from linkcue.model import LexiconModel, save_lexicon_model
from linkcue.protocol import serve


def _serve_lines(lines):
    stdin = io.StringIO("".join(line + "\n" for line in lines))
    stdout = io.StringIO()
    serve(LexiconModel(), stdin=stdin, stdout=stdout)
    return [json.loads(line) for line in stdout.getvalue().splitlines()]


def test_one_response_per_request_matched_by_id():
    requests = [
        {"id": 3, "url": "https://github.com/a/b",
         "context": "code at [URL]", "section": "S"},
        {"id": 1, "url": "http://x.org/d",
         "context": "the dataset at [URL]", "section": "S"},
    ]
    responses = _serve_lines([json.dumps(r) for r in requests])
    assert [r["id"] for r in responses] == [3, 1]
    assert responses[0]["label"] == "methods"
    assert responses[1]["label"] == "data"
    assert all(0.0 <= r["confidence"] <= 1.0 for r in responses)


def test_malformed_line_yields_error_response_and_session_continues():
    responses = _serve_lines([
        '{"id": 7, "url": "http://x.org", "context": "data at [URL]"}',
        'this is not json but mentions "id": 9 anyway',
        '{"id": 8, "url": "http://x.org", "context": "code at [URL]"}',
    ])
    assert len(responses) == 3
    assert responses[0]["label"] == "data"
    assert "error" in responses[1]
    assert responses[1]["id"] == 9
    assert responses[2]["label"] == "methods"


def test_empty_input_clean_exit():
    assert _serve_lines([]) == []


def test_cli_serve_empty_stdin_exit_zero(tmp_path):
    model_dir = tmp_path / "echo"
    save_lexicon_model(model_dir)
    proc = subprocess.run(
        [sys.executable, "-m", "linkcue.cli", "serve", "--model", str(model_dir)],
        input="", capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == ""


def test_cli_serve_unreadable_model_exits_nonzero_before_input(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "linkcue.cli", "serve",
         "--model", str(tmp_path / "nope")],
        input='{"id": 1, "url": "http://x.org", "context": "c"}\n',
        capture_output=True, text=True)
    assert proc.returncode != 0
    assert proc.stdout == ""
    assert "cannot load model" in proc.stderr
