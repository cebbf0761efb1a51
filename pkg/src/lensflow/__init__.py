"""Curvature flow of symmetric lens networks with two triple junctions."""

__version__ = "0.1.0"
