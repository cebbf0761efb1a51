"""Parametric curvature flow with sliding endpoints on the axis.

Solves ``gamma_t = gamma_xx / |gamma_x|^2`` for the upper curve of the lens
network.  Endpoints keep ``y = 0`` and fixed tangent angles; they slide
freely along the axis.

The semi-implicit scheme freezes ``1 / |gamma_x|^2`` at the start of a step
and solves one banded system per coordinate: first ``y`` with Dirichlet
rows, then ``x`` with the angle closure rows

    (-3 x_0 + 4 x_1 - x_2) sin a0 = (4 y_1 - y_2) cos a0

(mirrored at node N), the three-point one-sided tangent being parallel to
``(cos a0, sin a0)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import DiagnosticsRecord, sample
from .geometry import PlanarCurve, compute_frames, segment_lengths

__all__ = [
    "FlowState",
    "StepPolicy",
    "Stops",
    "Trajectory",
    "SingularStop",
    "step",
    "run",
    "regrid",
    "endpoint_angle_error",
]


class SingularStop(RuntimeError):
    """The step cannot proceed (dt underflow or unrecoverable collapse)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class FlowState:
    curve: PlanarCurve
    t: float = 0.0
    step_count: int = 0
    last_dt: float = 0.0
    bc_angles: tuple = (np.pi / 3, -np.pi / 3)
    free_ends: bool = False  # validation mode: endpoints held fixed, no angle rows


@dataclass(frozen=True)
class StepPolicy:
    scheme: str = "semi_implicit"
    cfl: float = 0.5
    dt_factor: float = 20.0
    dt_cap: float = np.inf
    curvature_adaptive: bool = True
    c_kappa: float = 0.05
    regrid_every: int = 0
    regrid_ratio: float = 4.0
    angle_tol: float = 1e-8
    dt_min: float = 1e-14

    def __post_init__(self):
        if self.scheme not in ("explicit", "semi_implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.dt_factor <= 0 or self.c_kappa <= 0 or self.dt_cap <= 0:
            raise ValueError("step size controls must be positive")


@dataclass(frozen=True)
class Stops:
    horizon: float = np.inf
    length_min: float = 1e-3
    kappa_max: float = 1e4
    gap_min: float = 1e-3
    max_steps: int = 5_000_000


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    frames: list = field(default_factory=list)  # (t, nodes)
    halt_reason: str = ""
    steps: int = 0
    final: FlowState | None = None
    dts: list = field(default_factory=list)  # dt of the step ending at each record
    wall_time: float = 0.0


def endpoint_angle_error(curve: PlanarCurve, angles) -> float:
    p = curve.nodes
    d0 = -3.0 * p[0] + 4.0 * p[1] - p[2]
    d1 = 3.0 * p[-1] - 4.0 * p[-2] + p[-3]
    err = 0.0
    for d, a in ((d0, angles[0]), (d1, angles[1])):
        diff = np.arctan2(d[1], d[0]) - a
        err = max(err, abs((diff + np.pi) % (2 * np.pi) - np.pi))
    return float(err)


def _metric(p):
    seg = np.hypot(*np.diff(p, axis=0).T)
    q = np.empty(p.shape[0])
    q[1:-1] = 0.5 * (seg[:-1] + seg[1:])
    q[0], q[-1] = seg[0], seg[-1]
    return seg, q


def choose_dt(state: FlowState, policy: StepPolicy, horizon: float = np.inf) -> float:
    p = state.curve.nodes
    seg, q = _metric(p)
    explicit = 0.5 * float(np.min(q[1:-1]) ** 2)
    dt = policy.cfl * explicit
    if policy.scheme == "semi_implicit":
        dt *= policy.dt_factor
    if policy.curvature_adaptive:
        kmax = float(np.max(np.abs(compute_frames(state.curve).kappa)))
        if kmax > 0:
            dt = min(dt, policy.c_kappa / kmax ** 2)
    dt = min(dt, policy.dt_cap)
    if horizon - state.t < dt:
        dt = horizon - state.t
    return dt


def _solve_semi_implicit(p, dt, angles, free_ends):
    n = p.shape[0] - 1
    _, q = _metric(p)
    r = dt / q[1:-1] ** 2
    # y: tridiagonal, Dirichlet ends
    ab = np.zeros((3, n + 1))
    ab[1, 0] = ab[1, n] = 1.0
    ab[1, 1:-1] = 1.0 + 2.0 * r
    ab[0, 2:] = -r
    ab[2, :-2] = -r
    rhs_y = p[:, 1].copy()
    if not free_ends:
        rhs_y[0] = rhs_y[n] = 0.0
    y = solve_banded((1, 1), ab, rhs_y)
    if not free_ends:
        y[0] = y[n] = 0.0
    if free_ends:
        x = solve_banded((1, 1), ab, p[:, 0].copy())
        return np.column_stack([x, y])
    # x: pentadiagonal band layout, rows 0 and N hold the angle closures
    a0, a1 = angles
    c0, c1 = np.cos(a0) / np.sin(a0), np.cos(a1) / np.sin(a1)
    bx = np.zeros((5, n + 1))
    bx[2, 1:-1] = 1.0 + 2.0 * r
    bx[1, 2:] = -r
    bx[3, :-2] = -r
    # row 0: -3 x0 + 4 x1 - x2
    bx[2, 0], bx[1, 1], bx[0, 2] = -3.0, 4.0, -1.0
    # row n: 3 xn - 4 x_{n-1} + x_{n-2}
    bx[2, n], bx[3, n - 1], bx[4, n - 2] = 3.0, -4.0, 1.0
    rhs_x = p[:, 0].copy()
    rhs_x[0] = (4.0 * y[1] - y[2]) * c0
    rhs_x[n] = (-4.0 * y[n - 1] + y[n - 2]) * c1
    x = solve_banded((2, 2), bx, rhs_x)
    return np.column_stack([x, y])


def _solve_explicit(p, dt, angles, free_ends):
    _, q = _metric(p)
    new = p.copy()
    new[1:-1] += (dt / q[1:-1] ** 2)[:, None] * (p[2:] - 2.0 * p[1:-1] + p[:-2])
    if free_ends:
        return new
    new[0, 1] = new[-1, 1] = 0.0
    c0, c1 = 1.0 / np.tan(angles[0]), 1.0 / np.tan(angles[1])
    new[0, 0] = (4.0 * new[1, 0] - new[2, 0] - (4.0 * new[1, 1] - new[2, 1]) * c0) / 3.0
    new[-1, 0] = (4.0 * new[-2, 0] - new[-3, 0] + (-4.0 * new[-2, 1] + new[-3, 1]) * c1) / 3.0
    return new


def _advance(p, dt, policy, angles, free_ends):
    if policy.scheme == "explicit":
        return _solve_explicit(p, dt, angles, free_ends)
    return _solve_semi_implicit(p, dt, angles, free_ends)


def _collapsed(new, ref_len):
    if not np.all(np.isfinite(new)):
        return True
    seg = np.hypot(*np.diff(new, axis=0).T)
    return bool(np.min(seg) <= 1e-12 * ref_len)


def _direction_ok(new, angles):
    d0 = -3.0 * new[0] + 4.0 * new[1] - new[2]
    d1 = 3.0 * new[-1] - 4.0 * new[-2] + new[-3]
    return (d0 @ np.array([np.cos(angles[0]), np.sin(angles[0])]) > 0
            and d1 @ np.array([np.cos(angles[1]), np.sin(angles[1])]) > 0)


def step(state: FlowState, policy: StepPolicy, dt: float | None = None,
         horizon: float = np.inf) -> FlowState:
    """Advance one time step."""
    if dt is None:
        dt = choose_dt(state, policy, horizon)
    if dt < policy.dt_min:
        raise SingularStop("dt_underflow")
    p = state.curve.nodes
    ref = float(np.sum(segment_lengths(state.curve)))
    new = _advance(p, dt, policy, state.bc_angles, state.free_ends)
    bad = _collapsed(new, ref) or (not state.free_ends and not _direction_ok(new, state.bc_angles))
    if bad:
        p = regrid(state.curve).nodes
        new = _advance(p, dt, policy, state.bc_angles, state.free_ends)
        if _collapsed(new, ref) or (not state.free_ends and not _direction_ok(new, state.bc_angles)):
            raise SingularStop("collapse")
    curve = PlanarCurve(new)
    if not state.free_ends and endpoint_angle_error(curve, state.bc_angles) > policy.angle_tol:
        raise SingularStop("angle_drift")
    count = state.step_count + 1
    seg = segment_lengths(curve)
    if (policy.regrid_every and count % policy.regrid_every == 0) or \
            (policy.regrid_ratio and seg.max() > policy.regrid_ratio * seg.min()):
        curve = _regrid_keep_angles(curve, state)
    return replace(state, curve=curve, t=state.t + dt, step_count=count, last_dt=dt)


def _regrid_keep_angles(curve, state):
    new = regrid(curve).nodes.copy()
    if state.free_ends:
        return PlanarCurve(new)
    # Re-impose the angle closure on the end nodes after resampling.
    c0, c1 = 1.0 / np.tan(state.bc_angles[0]), 1.0 / np.tan(state.bc_angles[1])
    x0 = (4.0 * new[1, 0] - new[2, 0] - (4.0 * new[1, 1] - new[2, 1]) * c0) / 3.0
    xn = (4.0 * new[-2, 0] - new[-3, 0] + (-4.0 * new[-2, 1] + new[-3, 1]) * c1) / 3.0
    new[0, 0], new[-1, 0] = x0, xn
    return PlanarCurve(new)


def regrid(curve: PlanarCurve) -> PlanarCurve:
    """Resample to uniform arclength by linear interpolation along the polyline."""
    p = curve.nodes
    n = curve.n
    seg = segment_lengths(curve)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = s[-1] * np.arange(n + 1) / n
    target[-1] = s[-1]
    k = np.clip(np.searchsorted(s, target, side="right") - 1, 0, n - 1)
    w = (target - s[k]) / seg[k]
    new = p[k] + w[:, None] * (p[k + 1] - p[k])
    new[0], new[-1] = p[0], p[-1]
    return PlanarCurve(new)


def _check_stops(state, rec, stops):
    if rec.length < stops.length_min:
        return "length"
    if rec.max_abs_kappa > stops.kappa_max:
        return "kappa_max"
    if not state.free_ends and rec.junction_gap < stops.gap_min:
        return "junction_gap"
    if state.t >= stops.horizon:
        return "horizon"
    return ""


def run(state: FlowState, policy: StepPolicy, stops: Stops = Stops(), sample_every: int = 10,
        frames_every: int = 0, g_every: int = 10, on_record=None) -> Trajectory:
    """Iterate ``step`` until a stop triggers.

    A record is taken at the start, every ``sample_every`` steps and at the
    halt.  Every ``g_every``-th record carries the embeddedness ratio; every
    ``frames_every``-th record stores a node snapshot (0 disables frames
    except the first and last).
    """
    clock = time.perf_counter()
    traj = Trajectory()
    angles = state.bc_angles

    def record(st, final=False):
        k = len(traj.records)
        with_g = bool(g_every) and (k % g_every == 0) and not st.free_ends
        rec = sample(st.curve, st.t, angles, with_g=with_g)
        traj.records.append(rec)
        traj.dts.append(st.last_dt)
        if k == 0 or final or (frames_every and k % frames_every == 0):
            traj.frames.append((st.t, st.curve.nodes))
        if on_record is not None:
            on_record(rec)
        return rec

    rec = record(state)
    reason = _check_stops(state, rec, stops) if stops.horizon > state.t else "horizon"
    while not reason:
        if state.step_count >= stops.max_steps:
            reason = "max_steps"
            break
        try:
            state = step(state, policy, horizon=stops.horizon)
        except SingularStop as exc:
            reason = exc.reason
            break
        if state.step_count % sample_every == 0 or state.t >= stops.horizon:
            rec = record(state)
            reason = _check_stops(state, rec, stops)
        else:
            reason = _cheap_stops(state, stops)
            if reason:
                record(state)
    last = traj.records[-1]
    if last.t != state.t:
        record(state, final=True)
    elif traj.frames[-1][0] != state.t:
        traj.frames.append((state.t, state.curve.nodes))
    traj.halt_reason = reason
    traj.steps = state.step_count
    traj.final = state
    traj.wall_time = time.perf_counter() - clock
    return traj


def _cheap_stops(state, stops):
    p = state.curve.nodes
    if not state.free_ends and p[-1, 0] - p[0, 0] < stops.gap_min:
        return "junction_gap"
    if state.t >= stops.horizon:
        return "horizon"
    if float(np.sum(segment_lengths(state.curve))) < stops.length_min:
        return "length"
    return ""
