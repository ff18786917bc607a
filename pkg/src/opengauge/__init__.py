"""Exact and mean-field numerics for gauge invariance in dissipative fermion systems."""

__version__ = "0.1.0"
