"""Shared constructors for tests."""

import numpy as np

from lensflow.geometry import PlanarCurve


def arc_curve(radius, start, stop, n, center=(0.0, 0.0)):
    """Circle arc sampled uniformly in angle, traversed from ``start`` to ``stop``."""
    phi = np.linspace(start, stop, n + 1)
    return PlanarCurve(np.column_stack([center[0] + radius * np.cos(phi),
                                        center[1] + radius * np.sin(phi)]))


def lens_arc(half_angle, n, radius=1.0):
    """Symmetric circular lens arc with both ends on the axis, left to right."""
    c = -radius * np.cos(half_angle)
    return arc_curve(radius, np.pi / 2 + half_angle, np.pi / 2 - half_angle, n, (0.0, c))
