"""Reduced-order models on spectral submanifolds, globalized by Pade approximants."""

__version__ = "0.1.0"
