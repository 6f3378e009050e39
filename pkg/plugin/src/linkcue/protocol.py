"""The line-delimited stdin/stdout serving loop.

One JSON response per request line, matched by id; a malformed request gets
an error response for whatever id can be salvaged and the session keeps
going. Output is flushed after every line so the host's batch reader never
stalls on buffering.
"""

import json
import re
import sys

_ID_RE = re.compile(r'"id"\s*:\s*("(?:[^"\\]|\\.)*"|-?\d+)')


def _salvage_id(line):
    m = _ID_RE.search(line)
    if m is None:
        return None
    try:
        return json.loads(m.group(1))
    except ValueError:
        return None


def serve(model, stdin=None, stdout=None):
    """Run the protocol loop until stdin closes. Returns the request count."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    handled = 0
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        handled += 1
        try:
            rec = json.loads(line)
            item_id = rec["id"]
            label, confidence = model.predict(
                str(rec.get("context", "")), str(rec.get("url", "")))
            response = {"id": item_id, "label": label,
                        "confidence": round(float(confidence), 6)}
        except (KeyError, TypeError, ValueError) as exc:
            response = {"id": _salvage_id(line), "error": f"bad request: {exc}"}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return handled
