"""Conformal Willmore tori in R^4 built from elliptic functions."""

__version__ = "0.1.0"
