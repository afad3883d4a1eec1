"""Frequency-constrained unit-commitment benchmark toolkit for island grids."""

__version__ = "0.1.0"
