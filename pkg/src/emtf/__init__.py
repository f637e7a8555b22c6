"""Euler-Maxwell two-fluid toolkit on the periodic cube."""
__version__ = "0.1.0"
