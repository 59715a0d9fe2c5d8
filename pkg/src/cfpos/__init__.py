"""Hybrid RSS/AOA fingerprint positioning with Gaussian process regression."""

__version__ = "0.1.0"
