"""Spectral curves E = F(v) and their geometric inversion to potential shapes."""

__version__ = "0.1.0"
