"""Polynomial lemniscates: tracing, length, and the bounds around them."""

__version__ = "0.1.0"
