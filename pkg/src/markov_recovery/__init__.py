"""Conditional mutual information, recovery maps and companion one-shot, typicality and de Finetti numerics."""

__version__ = "0.1.0"
