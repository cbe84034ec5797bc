"""Simulator and verification lab for the C_l-free random graph process."""
__version__ = "0.1.0"
