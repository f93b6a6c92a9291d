"""Cubic-map dynamics of large-step gradient descent on quadratic models."""

__version__ = "0.1.0"
