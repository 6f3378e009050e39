"""Standalone URL-mention classifier worker.

Speaks a line-delimited JSON protocol on stdin/stdout: requests
``{id, url, context, section}``, responses ``{id, label, confidence}``.
Ships two model types: a deterministic cue-lexicon mirror (the conformance
baseline) and a small trainable transformer over (context, url) inputs.
"""

__version__ = "0.1.0"
