"""Directed information flows in LTI feedback loops over AWGN channels."""

__version__ = "0.1.0"
