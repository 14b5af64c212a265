"""Cavity method for spanning subgraphs with local vertex constraints."""

__version__ = "0.1.0"
