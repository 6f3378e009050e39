"""Corpus-scale mining and analysis of URL mentions in LaTeX paper corpora."""

__version__ = "0.1.0"
