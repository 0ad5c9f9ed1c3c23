"""Boundary-driven symmetric exclusion on hypercubes and its heat-equation limit."""

__version__ = "0.1.0"
