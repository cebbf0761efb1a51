"""Admissible initial curves and their compatibility check.

Families:

``convex_lens``
    The self-shrinking lens arc (``shape = shrinker``) or a polynomial lens
    (``shape = poly``), scaled by ``scale``.
``perturbed_lens``
    A convex lens plus one compactly supported bump in the height.
``double_bubble``
    A curve meeting the axis with tangent angles of ``+-2pi/3``: a rounded
    cap on straight flanks closing into a narrow neck (``shape = cone``) or a
    240 degree circular arc (``shape = arc``).
``graph_example1``
    A graph ``f`` over ``[0, 1]`` with slopes ``+-sqrt(3)`` at the ends and the
    sign pattern ``+, -, +``; the left positive lobe has area ``eps`` and the
    negative lobe area ``c``.

Arc-shaped families are sampled with a parameter warp ``s(x)`` chosen so that
the second derivative along the parameter keeps the endpoints on the axis
(the second-order compatibility condition of the flow).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .embedding import first_self_intersection
from .geometry import PlanarCurve, endpoint_derivatives
from .shrinker import ShrinkerProfile, solve

__all__ = [
    "FAMILIES",
    "ScenarioSpec",
    "CompatibilityReport",
    "GraphDatum",
    "InvalidScenarioError",
    "build",
    "validate",
    "bc_angles",
    "shrinker_profile",
    "bump",
]

FAMILIES = ("convex_lens", "perturbed_lens", "graph_example1", "double_bubble")

DEFAULTS = {
    "convex_lens": {"shape": "shrinker", "scale": 1.0, "bulge": 0.0},
    "perturbed_lens": {"shape": "shrinker", "scale": 1.0, "bulge": 0.0,
                       "amplitude": -0.45, "center": 0.5, "width": 0.18},
    "double_bubble": {"radius": 1.0, "shape": "cone", "cap": 0.88},
    "graph_example1": {"eps": 0.05, "c": 0.30},
}


class InvalidScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    family: str
    params: dict = field(default_factory=dict)
    n: int = 400

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidScenarioError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 32:
            raise InvalidScenarioError(f"resolution n={self.n} below the minimum 32")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise InvalidScenarioError(f"unknown parameters for {self.family}: {sorted(unknown)}")

    def get(self, key):
        return self.params.get(key, DEFAULTS[self.family][key])


def bc_angles(family: str) -> tuple[float, float]:
    """Prescribed tangent angles at the two endpoints."""
    if family == "double_bubble":
        return 2 * np.pi / 3, -2 * np.pi / 3
    return np.pi / 3, -np.pi / 3


@lru_cache(maxsize=1)
def shrinker_profile() -> ShrinkerProfile:
    return solve()


def bump(x, center, width):
    """C^2 bump ``(1 - r^2)^3`` on ``|x - center| < width``, 0 elsewhere."""
    r = (np.asarray(x, dtype=float) - center) / width
    return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 3, 0.0)


def _warp(x, length, k0, k1, a0, a1):
    """Arclength as a function of the parameter with prescribed s''(0), s''(1).

    ``s'' = -kappa s'^2 / tan(alpha)`` at each end keeps the parametric
    acceleration tangent to the axis there.
    """
    c0 = -k0 * length / np.tan(a0)
    c1 = -k1 * length / np.tan(a1)
    phi0 = 0.5 * x ** 2 * (1 - x) ** 3
    phi1 = 0.5 * (1 - x) ** 2 * x ** 3
    return length * (x + c0 * phi0 + c1 * phi1)


def _shrinker_lens(n, scale):
    prof = shrinker_profile()
    x = np.arange(n + 1) / n
    kend = prof.endpoint_curvature()
    s = _warp(x, prof.length, kend, kend, np.pi / 3, -np.pi / 3) - prof.half_length
    px, py, _, _ = prof.evaluate(s)
    nodes = np.column_stack([px, py]) * scale
    nodes[0] = (-prof.half_width * scale, 0.0)
    nodes[-1] = (prof.half_width * scale, 0.0)
    return nodes


def _poly_lens(n, scale, bulge):
    x = np.arange(n + 1) / n
    u = x * (1 - x)
    X = scale * (x - 0.5)
    Y = scale * (np.sqrt(3.0) * (u + u * u) + bulge * u ** 3)
    Y[0] = Y[-1] = 0.0
    return np.column_stack([X, Y])


def _lens_nodes(spec):
    shape = spec.get("shape")
    scale = float(spec.get("scale"))
    if scale <= 0:
        raise InvalidScenarioError("scale must be positive")
    if shape == "shrinker":
        return _shrinker_lens(spec.n, scale)
    if shape == "poly":
        bulge = float(spec.get("bulge"))
        if bulge < -6.0 * np.sqrt(3.0):
            raise InvalidScenarioError("bulge too negative; the lens loses convexity")
        return _poly_lens(spec.n, scale, bulge)
    raise InvalidScenarioError(f"unknown lens shape {shape!r}")


def _smoothstep(u):
    """Odd quintic with h(1) = 1 and h'(1) = h''(1) = 0."""
    return (15 * u - 10 * u ** 3 + 3 * u ** 5) / 8


def _smoothstep_rate(u):
    return 15 * (1 - u * u) ** 2 / 8


_GL20 = np.polynomial.legendre.leggauss(20)


def _bubble_half(sig, shape, cap):
    """Right half of the bubble at arclength fractions ``sig`` (sorted, in [0, 1]).

    The tangent angle is ``-(2pi/3) sig`` for the arc and
    ``-(2pi/3) h(min(sig / cap, 1))`` for the cone, ``h`` the quintic
    smoothstep.  Positions are accumulated with 20-point Gauss-Legendre on each
    sample interval (split at the cap boundary).
    """
    if shape == "arc":
        def theta(u):
            return -(2 * np.pi / 3) * u
        breaks = []
    else:
        def theta(u):
            return -(2 * np.pi / 3) * _smoothstep(np.minimum(u / cap, 1.0))
        breaks = [cap] if cap < 1 else []
    gx, gw = _GL20
    pts = np.unique(np.concatenate([[0.0], sig, breaks]))
    lo, hi = pts[:-1], pts[1:]
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = mid[:, None] + rad[:, None] * gx[None, :]
    th = theta(u)
    dx = rad * (np.cos(th) @ gw)
    dy = rad * (np.sin(th) @ gw)
    xy = np.column_stack([np.concatenate([[0.0], np.cumsum(dx)]),
                          np.concatenate([[0.0], np.cumsum(dy)])])
    idx = np.searchsorted(pts, sig)
    return xy[idx], xy[-1]


def _double_bubble(n, radius, shape, cap):
    """Bubble meeting the axis at +-2pi/3.

    ``shape = arc`` is the 240 degree circular arc of the given radius.
    ``shape = cone`` turns only over the first ``cap`` fraction of each half
    and runs straight into a narrow neck between the endpoints.  Both halves
    have the arclength of the arc.
    """
    if radius <= 0:
        raise InvalidScenarioError("radius must be positive")
    if shape not in ("arc", "cone"):
        raise InvalidScenarioError(f"unknown bubble shape {shape!r}")
    if not 0 < cap <= 1:
        raise InvalidScenarioError("cap must lie in (0, 1]")
    half = 2 * np.pi * radius / 3
    x = np.arange(n + 1) / n
    if shape == "arc":
        k_end = -1.0 / radius
        s = _warp(x, 2 * half, k_end, k_end, 2 * np.pi / 3, -2 * np.pi / 3) - half
    else:
        # the flanks are straight at the ends: uniform arclength is compatible
        s = (2 * x - 1) * half
    sig = np.abs(s) / half
    order = np.argsort(sig, kind="stable")
    xy = np.empty((n + 1, 2))
    xy[order], end = _bubble_half(sig[order], shape, cap)
    xy *= half
    end = end * half
    w = float(end[0])
    if w <= 0:
        raise InvalidScenarioError("the bubble overlaps itself")
    nodes = np.column_stack([np.where(s < 0, -xy[:, 0], xy[:, 0]), xy[:, 1] - end[1]])
    nodes[0] = (-w, 0.0)
    nodes[-1] = (w, 0.0)
    hit = first_self_intersection(nodes)
    if hit is not None or np.any(nodes[1:-1, 1] <= 0):
        raise InvalidScenarioError(f"shape {shape!r} gives a non-embedded bubble")
    return nodes


# ---------------------------------------------------------------- graph datum

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _integrate(fun, lo, hi, breaks=()):
    """Gauss-Legendre on polynomial pieces; exact for the graph datum."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        m, r = 0.5 * (a + b), 0.5 * (b - a)
        total += r * float(np.sum(_GL_W * fun(m + r * _GL_X)))
    return total


@dataclass(frozen=True)
class GraphDatum:
    """Graph initial datum over ``[0, 1]``: ``f = base - amp * bump``."""

    amp: float
    half_width: float
    eps: float
    c: float
    x1: float
    x2: float

    def f(self, x):
        x = np.asarray(x, dtype=float)
        u = x * (1 - x)
        return np.sqrt(3.0) * (u + u * u) - self.amp * bump(x, 0.5, self.half_width)

    def fx(self, x, h=1e-6):
        x = np.asarray(x, dtype=float)
        u, du = x * (1 - x), 1 - 2 * x
        r = (x - 0.5) / self.half_width
        db = np.where(np.abs(r) < 1, -6 * r * (1 - r * r) ** 2 / self.half_width, 0.0)
        return np.sqrt(3.0) * (du + 2 * u * du) - self.amp * db

    @property
    def breaks(self):
        return (0.5 - self.half_width, 0.5 + self.half_width)

    def lobe_areas(self):
        plus = _integrate(self.f, 0.0, self.x1, self.breaks)
        minus = -_integrate(self.f, self.x1, self.x2, self.breaks)
        return plus, minus


def _first_root(fun, lo, hi):
    grid = np.linspace(lo, hi, 401)
    v = fun(grid)
    k = np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))
    if k.size == 0:
        return None
    k = int(k[0])
    if v[k] == 0:
        return float(grid[k])
    return brentq(fun, grid[k], grid[k + 1], xtol=1e-15)


def _graph_for(amp, hw):
    def f(x):
        x = np.asarray(x, dtype=float)
        u = x * (1 - x)
        return np.sqrt(3.0) * (u + u * u) - amp * bump(x, 0.5, hw)
    x1 = _first_root(f, 1e-9, 0.5)
    if x1 is None:
        return None
    return GraphDatum(amp, hw, 0.0, 0.0, x1, 1.0 - x1)


def _lobes(amp, hw):
    g = _graph_for(amp, hw)
    if g is None:
        return 0.0, 0.0, None
    p, m = g.lobe_areas()
    return p, m, g


def _amp_for_c(hw, c):
    """Bump amplitude giving negative-lobe area c at the given support."""
    lo, hi = 0.0, 1.0
    while _lobes(hi, hw)[1] < c:
        hi *= 2.0
        if hi > 1e6:
            raise InvalidScenarioError("cannot reach the requested negative lobe")
    return brentq(lambda a: _lobes(a, hw)[1] - c, lo, hi, xtol=1e-14)


def _graph_example1(eps, c):
    if eps <= 0 or c <= 0:
        raise InvalidScenarioError("graph_example1 needs eps > 0 and c > 0 (flat datum rejected)")

    def plus_minus_eps(hw):
        amp = _amp_for_c(hw, c)
        return _lobes(amp, hw)[0] - eps

    lo, hi = 0.05, 0.5 - 1e-9
    f_lo, f_hi = plus_minus_eps(lo), plus_minus_eps(hi)
    if f_lo * f_hi > 0:
        raise InvalidScenarioError(f"no graph datum with eps={eps}, c={c} in this family")
    hw = brentq(plus_minus_eps, lo, hi, xtol=1e-14)
    amp = _amp_for_c(hw, c)
    g = _graph_for(amp, hw)
    p, m = g.lobe_areas()
    return GraphDatum(amp, hw, p, m, g.x1, g.x2)


# ---------------------------------------------------------------- interface

def build(spec: ScenarioSpec):
    """Construct the initial curve (or ``GraphDatum`` for graph_example1)."""
    fam = spec.family
    if fam == "graph_example1":
        return _graph_example1(float(spec.get("eps")), float(spec.get("c")))
    if fam == "double_bubble":
        return PlanarCurve(_double_bubble(spec.n, float(spec.get("radius")), spec.get("shape"),
                                          float(spec.get("cap"))))
    nodes = _lens_nodes(spec)
    if fam == "perturbed_lens":
        amp = float(spec.get("amplitude"))
        center, width = float(spec.get("center")), float(spec.get("width"))
        if not (width > 0 and center - width > 0 and center + width < 1):
            raise InvalidScenarioError("bump support must lie strictly inside (0, 1)")
        x = np.arange(spec.n + 1) / spec.n
        nodes = nodes.copy()
        nodes[:, 1] += amp * float(spec.get("scale")) * bump(x, center, width)
        nodes[0, 1] = nodes[-1, 1] = 0.0
        curve = PlanarCurve(nodes)
        hit = first_self_intersection(nodes)
        if hit is not None:
            raise InvalidScenarioError(f"bump makes the curve self-intersect at segments {hit}")
        if np.any(nodes[1:-1, 1] <= 0):
            raise InvalidScenarioError("bump pushes the curve onto the axis")
        return curve
    return PlanarCurve(nodes)


@dataclass(frozen=True)
class CompatibilityReport:
    endpoint_position_error: float
    tangent_angle_error: float
    second_order_residual: tuple
    second_order_residual_alt: tuple
    embedded: bool
    min_y_interior: float
    witness: tuple | None = None

    def passes(self, tol: float = 1e-9) -> bool:
        return (self.endpoint_position_error < tol and self.tangent_angle_error < tol
                and max(self.second_order_residual) < tol)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def validate(curve: PlanarCurve, angles=(np.pi / 3, -np.pi / 3)) -> CompatibilityReport:
    """Endpoint, tangent and second-order compatibility residuals.

    The second-order residual is ``|kappa + tan(alpha) lambda|`` at each end,
    i.e. ``kappa = -sqrt(3) lambda`` at the start and ``+sqrt(3) lambda`` at
    the end for the pi/3 family.  ``second_order_residual_alt`` reports the
    reading with ``-sqrt(3)`` at both ends.
    """
    (g0, gg0), (g1, gg1) = endpoint_derivatives(curve)
    pos = max(abs(curve.nodes[0, 1]), abs(curve.nodes[-1, 1]))
    ang = max(abs(_wrap(np.arctan2(g0[1], g0[0]) - angles[0])),
              abs(_wrap(np.arctan2(g1[1], g1[0]) - angles[1])))
    res, alt = [], []
    for d1, d2, a in ((g0, gg0, angles[0]), (g1, gg1, angles[1])):
        speed2 = float(d1 @ d1)
        tau = d1 / np.sqrt(speed2)
        nu = np.array([-tau[1], tau[0]])
        kappa = float(d2 @ nu) / speed2
        lam = float(d2 @ tau) / speed2
        res.append(abs(kappa + np.tan(a) * lam))
        alt.append(abs(kappa + np.tan(abs(a)) * lam))
    hit = first_self_intersection(curve.nodes)
    miny = float(np.min(curve.nodes[1:-1, 1]))
    embedded = hit is None and miny > 0
    return CompatibilityReport(float(pos), float(ang), tuple(res), tuple(alt), embedded, miny,
                               None if hit is None else tuple(hit))
