"""Exact computations for the interacting partially directed self-avoiding walk."""

__version__ = "0.1.0"
