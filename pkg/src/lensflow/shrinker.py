"""Homothetically shrinking lens profile, solved by shooting from the apex.

The profile solves ``kappa + <gamma, nu> = 0`` in arclength form

    x' = cos(theta),  y' = sin(theta),  theta' = x sin(theta) - y cos(theta),

started at ``(0, y0)`` with ``theta = 0`` and stopped where ``y`` returns to
zero.  In the repo orientation (left to right above the axis) the tangent
must arrive at the axis with angle ``-pi/3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry import PlanarCurve

__all__ = [
    "ShrinkerProfile",
    "ShootResult",
    "shoot",
    "scan",
    "solve",
    "shrinker_rhs",
    "TARGET_ANGLE",
]

TARGET_ANGLE = -np.pi / 3
RTOL = 1e-12
ATOL = 1e-13
S_BUDGET = 20.0
_CHEB_DEG = 48


def shrinker_rhs(s, u):
    x, y, th = u
    c, sn = np.cos(th), np.sin(th)
    return np.array([c, sn, x * sn - y * c])


def _axis(s, u):
    return u[1]


_axis.terminal = True
_axis.direction = -1


@dataclass(frozen=True)
class ShootResult:
    residual: float
    s_end: float
    solution: object  # scipy OdeSolution, or None when no crossing


def shoot(y0: float, target_angle: float = TARGET_ANGLE, rtol: float = RTOL,
          atol: float = ATOL) -> ShootResult:
    """Integrate the right half from the apex; residual is theta(end) - target."""
    if not y0 > 0:
        raise ValueError("apex height must be positive")
    sol = solve_ivp(shrinker_rhs, (0.0, S_BUDGET), [0.0, y0, 0.0], method="DOP853",
                    rtol=rtol, atol=atol, events=_axis, dense_output=True, max_step=0.02)
    if sol.t_events[0].size == 0:
        return ShootResult(np.inf, np.nan, None)
    s_end = float(sol.t_events[0][0])
    theta_end = float(sol.y_events[0][0][2])
    return ShootResult(theta_end - target_angle, s_end, sol.sol)


def scan(lo: float = 0.1, hi: float = 2.0, step: float = 0.01):
    """Residuals on a uniform grid of apex heights."""
    count = int(round((hi - lo) / step)) + 1
    ys = lo + step * np.arange(count)
    return ys, np.array([shoot(float(y)).residual for y in ys])


@dataclass(frozen=True)
class ShrinkerProfile:
    """Symmetric self-shrinking lens arc in the repo orientation.

    The half arc from the apex is stored as Chebyshev series in arclength;
    ``curve(n)`` samples the full arc at uniform arclength.
    """

    y0: float
    half_length: float
    half_width: float
    residual: float
    angle_residual: float
    cheb: tuple = field(repr=False)

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    def _half(self, s):
        u = 2.0 * np.asarray(s, dtype=float) / self.half_length - 1.0
        return tuple(C.chebval(u, c) for c in self.cheb)

    def evaluate(self, s):
        """Position, tangent angle and curvature at signed arclength from the apex.

        Negative ``s`` is the left half, obtained by the reflection x -> -x.
        """
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        x, y, th = self._half(a)
        k = x * np.sin(th) - y * np.cos(th)
        sg = np.sign(s)
        sg = np.where(sg == 0, 1.0, sg)
        return sg * x, y, sg * th, k

    def curve(self, n: int = 400) -> PlanarCurve:
        s = np.linspace(-self.half_length, self.half_length, n + 1)
        x, y, _, _ = self.evaluate(s)
        nodes = np.column_stack([x, y])
        nodes[0] = (-self.half_width, 0.0)
        nodes[-1] = (self.half_width, 0.0)
        return PlanarCurve(nodes)

    @property
    def total_turning(self) -> float:
        return 2.0 * float(self._half(self.half_length)[2])

    def area(self) -> float:
        """Area between the arc and its mirror, by Gauss-Legendre quadrature."""
        u, w = np.polynomial.legendre.leggauss(64)
        x, y, th = (C.chebval(u, c) for c in self.cheb)
        # four quarter regions, each the integral of y dx over the right half
        return float(4.0 * np.sum(w * y * np.cos(th)) * 0.5 * self.half_length)

    def endpoint_curvature(self) -> float:
        """Curvature at the right end from the differentiated angle series."""
        return float(C.chebval(1.0, C.chebder(self.cheb[2])) * 2.0 / self.half_length)


def _bracket(lo=0.1, hi=2.0, step=0.1):
    ys, res = scan(lo, hi, step)
    finite = np.isfinite(res)
    flips = np.flatnonzero(finite[:-1] & finite[1:] & (np.sign(res[:-1]) != np.sign(res[1:])))
    if flips.size == 0:
        raise RuntimeError("no sign change of the shooting residual in the scan range")
    k = int(flips[0])
    return float(ys[k]), float(ys[k + 1])


def solve(tol: float = 1e-13, rtol: float = RTOL, atol: float = ATOL) -> ShrinkerProfile:
    """Root-find the apex height and assemble the profile."""
    lo, hi = _bracket()
    y0 = brentq(lambda y: shoot(y, rtol=rtol, atol=atol).residual, lo, hi,
                xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = shoot(y0, rtol=rtol, atol=atol)
    s_end = res.s_end
    # Chebyshev series of the angle; positions follow by spectral integration
    # so that the sampled curve's geometry is consistent with the angle.
    nodes = np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1))
    s = 0.5 * (nodes + 1.0) * s_end
    th_c = C.chebfit(nodes, res.solution(s)[2], _CHEB_DEG)
    th_n = C.chebval(nodes, th_c)
    half = 0.5 * s_end
    x_c = C.chebint(C.chebfit(nodes, np.cos(th_n), _CHEB_DEG), lbnd=-1.0, scl=half)
    y_c = C.chebint(C.chebfit(nodes, np.sin(th_n), _CHEB_DEG), lbnd=-1.0, scl=half)
    y_c[0] += y0
    cheb = (x_c, y_c, th_c)

    # Equation residual from the differentiated series, independent of the rhs path.
    u = np.linspace(-1.0, 1.0, 2001)
    x, y, th = (C.chebval(u, c) for c in cheb)
    dth = C.chebval(u, C.chebder(cheb[2])) * 2.0 / s_end
    ode_res = float(np.max(np.abs(dth - (x * np.sin(th) - y * np.cos(th)))))
    y_end = float(C.chebval(1.0, cheb[1]))
    half_width = float(C.chebval(1.0, cheb[0]))
    angle_res = float(C.chebval(1.0, cheb[2]) - TARGET_ANGLE)
    residual = max(ode_res, abs(y_end), abs(angle_res))
    return ShrinkerProfile(y0=float(y0), half_length=float(s_end), half_width=half_width,
                           residual=residual, angle_residual=angle_res, cheb=cheb)
