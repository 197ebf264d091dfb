"""Barrier-top resonance laboratory for semiclassical Schrödinger operators."""

__version__ = "0.1.0"
