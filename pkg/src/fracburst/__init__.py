"""Numerical toolkit for time- and space-fractional stochastic vorticity dynamics."""

__version__ = "0.1.0"
