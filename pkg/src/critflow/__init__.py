"""Pseudo-spectral mild solutions and function-space norms on the periodic box."""

__version__ = "0.1.0"
