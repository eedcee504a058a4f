"""Concolic security-predicate checking for a small register machine."""

__version__ = "0.1.0"
