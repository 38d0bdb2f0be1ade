"""Perimid - periodic-pyramid transformer for time-series analysis."""

__version__ = "0.1.0"
