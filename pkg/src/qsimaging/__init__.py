"""Quantum-statistical superresolution imaging toolkit."""

__version__ = "0.1.0"
