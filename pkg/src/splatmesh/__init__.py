"""Gaussian-splatting feature computation on a simulated 2D tile mesh."""

__version__ = "0.1.0"
