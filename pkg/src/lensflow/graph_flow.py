"""Moving-boundary graph flow ``f_t = f_xx / (1 + f_x^2)`` on ``[a(t), b(t)]``.

The graph meets the axis at both ends (``f = 0``) with slopes ``+sqrt(3)``
at ``a`` and ``-sqrt(3)`` at ``b``.  Values live on a fixed reference mesh
``xi`` in [0, 1], geometrically graded towards both ends, mapped to
``x = a + xi (b - a)``; the mesh motion enters as an advection term.

One step:

1. endpoint speeds are predicted from the current graph,
   ``a' = -f_xx(a) / (4 sqrt 3)`` and ``b' = f_xx(b) / (4 sqrt 3)`` (from
   differentiating ``f(a(t), t) = 0``);
2. implicit solve on the advanced interval with the diffusion coefficient
   frozen and three-point one-sided slope rows at the ends;
3. while the solved end values are not zero, each end speed is corrected by
   the distance to the zero of the end tangent line and step 2 repeated;
   the converged end values are re-pinned to 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .diagnostics import DiagnosticsRecord, sample
from .geometry import PlanarCurve, signed_enclosed_area

__all__ = [
    "GraphState",
    "GraphPolicy",
    "GraphStops",
    "LobeTrack",
    "LobePatternLost",
    "graded_mesh",
    "initial_state",
    "gstep",
    "track_lobes",
    "graph_curve",
    "run_graph",
    "endpoint_slopes",
]

SQRT3 = np.sqrt(3.0)


class LobePatternLost(RuntimeError):
    pass


def graded_mesh(m: int, h_min: float = 1e-5, ratio: float = 1.03) -> np.ndarray:
    """Symmetric mesh on [0, 1]: geometric growth from both ends, uniform middle."""
    if m < 8 or m % 2:
        raise ValueError("mesh needs an even number of at least 8 intervals")
    half = m // 2
    if h_min * half >= 0.5:
        raise ValueError("h_min too large for the mesh size")
    k = np.arange(half)
    growth = h_min * ratio ** k
    if np.sum(growth) <= 0.5:
        # too few intervals to reach the middle at this ratio: grow faster
        hi = (0.5 / h_min) ** (1.0 / (half - 1)) + 1.0
        ratio = brentq(lambda r: np.sum(h_min * r ** k) - 0.5, ratio, hi)
        widths = h_min * ratio ** k
    else:
        # cap the geometric widths so that each half sums to 0.5
        cap = brentq(lambda c: np.sum(np.minimum(growth, c)) - 0.5, h_min, 0.5)
        widths = np.minimum(growth, cap)
    widths *= 0.5 / np.sum(widths)
    left = np.concatenate([[0.0], np.cumsum(widths)])
    xi = np.concatenate([left, 1.0 - left[-2::-1]])
    xi[half], xi[-1] = 0.5, 1.0
    return xi


@dataclass(frozen=True)
class GraphState:
    a: float
    b: float
    xi: np.ndarray
    f: np.ndarray
    t: float = 0.0
    step_count: int = 0
    last_dt: float = 0.0
    pinned: bool = False  # validation mode: fixed interval, Dirichlet ends
    end_residual: float = 0.0  # |f| at the ends before re-pinning, last step

    @property
    def x(self) -> np.ndarray:
        return self.a + self.xi * (self.b - self.a)


@dataclass(frozen=True)
class GraphPolicy:
    c_kappa: float = 0.02
    dt_cap: float = 1e-4
    lobe_fraction: float = 0.02
    max_iter: int = 20
    end_tol: float = 1e-13
    dt_min: float = 1e-14


@dataclass(frozen=True)
class GraphStops:
    horizon: float = np.inf
    kappa_max: float = 1e5
    gap_min: float = 1e-3
    vplus_rel: float = 1e-6  # lobe counts as exhausted below this fraction of its initial area
    max_steps: int = 5_000_000


@dataclass(frozen=True)
class LobeTrack:
    x1: float
    x2: float
    v_plus: float
    v_minus: float
    v_plus_right: float


def initial_state(datum, m: int = 800, h_min: float = 1e-5, ratio: float = 1.03) -> GraphState:
    xi = graded_mesh(m, h_min, ratio)
    f = np.asarray(datum.f(xi), dtype=float)
    f[0] = f[-1] = 0.0
    return GraphState(a=0.0, b=1.0, xi=xi, f=f)


def _weights(z, x0, order):
    """Finite-difference weights for the ``order``-th derivative at x0 on nodes z."""
    z = np.asarray(z, dtype=float) - x0
    k = z.size
    vander = np.vander(z, k, increasing=True).T
    rhs = np.zeros(k)
    fact = 1.0
    for i in range(1, order + 1):
        fact *= i
    rhs[order] = fact
    return np.linalg.solve(vander, rhs)


def _end_derivs(x, f):
    """f_x and f_xx at both ends from four-point one-sided stencils."""
    wl1 = _weights(x[:4], x[0], 1)
    wl2 = _weights(x[:4], x[0], 2)
    wr1 = _weights(x[-4:], x[-1], 1)
    wr2 = _weights(x[-4:], x[-1], 2)
    return (wl1 @ f[:4], wl2 @ f[:4]), (wr1 @ f[-4:], wr2 @ f[-4:])


def endpoint_slopes(state: GraphState) -> tuple[float, float]:
    """Three-point one-sided slopes at both ends (the enforced stencil)."""
    x, f = state.x, state.f
    return float(_weights(x[:3], x[0], 1) @ f[:3]), float(_weights(x[-3:], x[-1], 1) @ f[-3:])


def _interior_derivs(x, f):
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    fx = (hm ** 2 * f[2:] - hp ** 2 * f[:-2] + (hp ** 2 - hm ** 2) * f[1:-1]) / (hp * hm * (hp + hm))
    fxx = 2.0 * ((f[2:] - f[1:-1]) / hp - (f[1:-1] - f[:-2]) / hm) / (hp + hm)
    return fx, fxx


def graph_kappa(state: GraphState) -> np.ndarray:
    """Curvature of the graph at interior nodes (sign of the repo orientation)."""
    fx, fxx = _interior_derivs(state.x, state.f)
    return fxx / (1.0 + fx ** 2) ** 1.5


def endpoint_speeds(state: GraphState) -> tuple[float, float]:
    (fx0, fxx0), (fx1, fxx1) = _end_derivs(state.x, state.f)
    return -fxx0 / (4.0 * SQRT3), fxx1 / (4.0 * SQRT3)


def choose_dt(state: GraphState, policy: GraphPolicy) -> float:
    k = graph_kappa(state)
    kmax = float(np.max(np.abs(k)))
    dt = policy.dt_cap
    if kmax > 0:
        dt = min(dt, policy.c_kappa / kmax ** 2)
    if not state.pinned:
        try:
            lobes = track_lobes(state)
            dt = min(dt, policy.lobe_fraction * lobes.v_plus / (np.pi / 3))
        except LobePatternLost:
            pass
    return dt


def _solve(state, dt, da, db):
    xi = state.xi
    a1 = state.a + dt * da
    b1 = state.b + dt * db
    x = a1 + xi * (b1 - a1)
    f = state.f
    m = xi.size - 1
    # frozen coefficient from the current slope, evaluated on the new mesh
    fx_old, _ = _interior_derivs(state.x, f)
    coef = 1.0 / (1.0 + fx_old ** 2)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    vel = da + xi[1:-1] * (db - da)  # mesh velocity at interior nodes
    # d/dt f|xi = coef f_xx + f_x * vel
    d2m = 2.0 / (hm * (hp + hm))
    d2p = 2.0 / (hp * (hp + hm))
    d1m = -hp / (hm * (hp + hm))
    d1p = hm / (hp * (hp + hm))
    d10 = (hp - hm) / (hp * hm)
    lower = -dt * (coef * d2m + vel * d1m)
    upper = -dt * (coef * d2p + vel * d1p)
    diag = 1.0 + dt * (coef * (d2m + d2p) - vel * d10)
    band = np.zeros((5, m + 1))
    band[2, 1:-1] = diag
    band[1, 2:] = upper
    band[3, :-2] = lower
    rhs = f.copy()
    if state.pinned:
        band[2, 0] = band[2, m] = 1.0
        rhs[0] = rhs[m] = 0.0
    else:
        w0 = _weights(x[:3], x[0], 1)
        wm = _weights(x[-3:], x[-1], 1)
        band[2, 0], band[1, 1], band[0, 2] = w0
        band[4, m - 2], band[3, m - 1], band[2, m] = wm
        rhs[0], rhs[m] = SQRT3, -SQRT3
    new = solve_banded((2, 2), band, rhs)
    return a1, b1, new


def gstep(state: GraphState, policy: GraphPolicy, dt: float | None = None) -> GraphState:
    if dt is None:
        dt = choose_dt(state, policy)
    if dt < policy.dt_min:
        raise RuntimeError("dt_underflow")
    if state.pinned:
        a1, b1, f = _solve(state, dt, 0.0, 0.0)
        f[0] = f[-1] = 0.0
        return replace(state, f=f, t=state.t + dt, step_count=state.step_count + 1, last_dt=dt)
    da, db = endpoint_speeds(state)
    scale = state.b - state.a
    for _ in range(policy.max_iter):
        a1, b1, f = _solve(state, dt, da, db)
        # move each end towards the zero of its tangent line, then re-solve
        shift_a = -f[0] / SQRT3
        shift_b = f[-1] / SQRT3
        if max(abs(shift_a), abs(shift_b)) <= policy.end_tol * scale:
            break
        da += shift_a / dt
        db += shift_b / dt
    # remaining end values are at the iteration tolerance: re-pin them
    end_residual = max(abs(f[0]), abs(f[-1]))
    f[0] = f[-1] = 0.0
    x = a1 + state.xi * (b1 - a1)
    if not b1 > a1 or not np.all(np.diff(x) > 0):
        raise RuntimeError("mesh tangling")
    return replace(state, a=a1, b=b1, f=f, t=state.t + dt, step_count=state.step_count + 1,
                   last_dt=dt, end_residual=end_residual)


def _lobe_integral(x, f, lo_idx, hi_idx, x_lo, x_hi):
    """Trapezoid integral of f over [x_lo, x_hi]; the ends are linear zeros."""
    xs = np.concatenate([[x_lo], x[lo_idx:hi_idx + 1], [x_hi]])
    fs = np.concatenate([[0.0], f[lo_idx:hi_idx + 1], [0.0]])
    return float(np.sum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs)))


def track_lobes(state: GraphState) -> LobeTrack:
    """Sign changes and lobe areas of the (+, -, +) pattern."""
    x, f = state.x, state.f
    s = np.sign(f[1:-1])
    change = np.flatnonzero(s[1:] != s[:-1]) + 1  # index of node before each change
    if s.size == 0 or s[0] <= 0 or s[-1] <= 0 or change.size != 2 or np.any(s == 0):
        raise LobePatternLost("V+ exhausted")
    i, j = change  # sign differs between node i and i+1 (interior numbering +1)
    x1 = x[i] - f[i] * (x[i + 1] - x[i]) / (f[i + 1] - f[i])
    x2 = x[j] - f[j] * (x[j + 1] - x[j]) / (f[j + 1] - f[j])
    vp = _lobe_integral(x, f, 1, i, x[0], x1)
    vm = -_lobe_integral(x, f, i + 1, j, x1, x2)
    vr = _lobe_integral(x, f, j + 1, x.size - 2, x2, x[-1])
    return LobeTrack(float(x1), float(x2), vp, vm, vr)


def graph_curve(state: GraphState) -> PlanarCurve:
    return PlanarCurve(np.column_stack([state.x, state.f]))


@dataclass
class GraphTrajectory:
    records: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    halt_reason: str = ""
    steps: int = 0
    final: GraphState | None = None
    dts: list = field(default_factory=list)
    wall_time: float = 0.0
    max_slope_residual: float = 0.0


def _record(state: GraphState) -> DiagnosticsRecord:
    curve = graph_curve(state)
    extra = dict(a=float(state.a), b=float(state.b))
    try:
        lob = track_lobes(state)
        extra.update(v_plus=lob.v_plus, v_minus=lob.v_minus, x1=lob.x1, x2=lob.x2)
    except LobePatternLost:
        pass
    rec = sample(curve, state.t, with_g=False, **extra)
    # sign-changing graph: report the signed area of the symmetrized network
    return rec.with_(area=signed_enclosed_area(curve))


def run_graph(state: GraphState, policy: GraphPolicy = GraphPolicy(),
              stops: GraphStops = GraphStops(), sample_every: int = 10,
              frames_every: int = 0, on_record=None) -> GraphTrajectory:
    clock = time.perf_counter()
    traj = GraphTrajectory()

    def record(st, final=False):
        k = len(traj.records)
        rec = _record(st)
        traj.records.append(rec)
        traj.dts.append(st.last_dt)
        if k == 0 or final or (frames_every and k % frames_every == 0):
            traj.frames.append((st.t, np.column_stack([st.x, st.f])))
        if on_record is not None:
            on_record(rec)
        s0, s1 = endpoint_slopes(st)
        traj.max_slope_residual = max(traj.max_slope_residual, abs(s0 - SQRT3), abs(s1 + SQRT3))
        return rec

    def check(st, rec):
        if not st.pinned:
            try:
                lob = track_lobes(st)
            except LobePatternLost:
                return "V+ exhausted"
            if lob.v_plus <= stops.vplus_rel * v0:
                return "V+ exhausted"
        if rec is not None and rec.max_abs_kappa > stops.kappa_max:
            return "kappa_max"
        if st.b - st.a < stops.gap_min:
            return "junction_gap"
        if st.t >= stops.horizon:
            return "horizon"
        return ""

    v0 = track_lobes(state).v_plus if not state.pinned else 0.0
    rec = record(state)
    reason = check(state, rec) if stops.horizon > state.t else "horizon"
    while not reason:
        if state.step_count >= stops.max_steps:
            reason = "max_steps"
            break
        try:
            dt = min(choose_dt(state, policy), stops.horizon - state.t)
            state = gstep(state, policy, dt)
        except RuntimeError as exc:
            reason = str(exc)
            break
        reason = check(state, None)
        if reason or state.step_count % sample_every == 0:
            rec = record(state, final=bool(reason))
            reason = reason or check(state, rec)
    if traj.records[-1].t != state.t:
        record(state, final=True)
    elif traj.frames[-1][0] != state.t:
        traj.frames.append((state.t, np.column_stack([state.x, state.f])))
    traj.halt_reason = reason
    traj.steps = state.step_count
    traj.final = state
    traj.wall_time = time.perf_counter() - clock
    return traj
