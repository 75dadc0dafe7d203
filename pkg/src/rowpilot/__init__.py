"""Depth-map corridor following with a three-class fallback controller."""

__version__ = "0.1.0"
