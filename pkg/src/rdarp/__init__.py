"""Exact branch-cut-and-price solver for the risk-aware dial-a-ride problem."""

__version__ = "0.1.0"
