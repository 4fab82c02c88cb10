"""Span/word SRL with a biaffine parser as auxiliary task, on a small numpy autodiff engine."""

__version__ = "0.1.0"
