"""Curvature, spectral and pinching diagnostics for closed surfaces in 3-space."""

__version__ = "0.1.0"
