"""Fractional-order models of apparent arterial compliance."""

__version__ = "0.1.0"
