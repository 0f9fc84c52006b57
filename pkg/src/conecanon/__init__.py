"""Canonical potentials of proper convex cones."""

__version__ = "0.1.0"
