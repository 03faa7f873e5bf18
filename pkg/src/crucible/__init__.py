"""Measure how much control algorithms improve under an automated tuning loop."""

__version__ = "0.1.0"
