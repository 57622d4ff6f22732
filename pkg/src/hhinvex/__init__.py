"""Numerical verification of Hermite-Hadamard type bounds for preinvex functions."""

__version__ = "0.1.0"
