"""Harmonic analysis toolkit for finite doubling metric measure spaces."""

__version__ = "0.1.0"
