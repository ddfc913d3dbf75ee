"""Temporal co-authorship link prediction toolkit."""

__version__ = "0.1.0"
