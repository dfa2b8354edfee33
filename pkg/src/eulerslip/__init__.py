"""Admissible fields, curvature-line frames and the persistence-failure identity."""

__version__ = "0.1.0"
