"""Isotonic estimation of a nondecreasing trend observed with stationary errors."""

__version__ = "0.1.0"
