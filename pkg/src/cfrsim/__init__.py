"""Frequency-domain OFDM channel simulation with insufficient cyclic prefix."""

__version__ = "0.1.0"
