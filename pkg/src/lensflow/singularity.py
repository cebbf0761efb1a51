"""Singular-time estimation, blow-up rescalings and singularity classification.

Runs are summarized by their record series (see ``diagnostics``) and stored
frames ``(t, nodes)``.  Two rescalings are provided:

* type I: ``(gamma - p) / sqrt(2 (T - t))`` about a fixed point ``p``;
* Hamilton: ``mu (gamma - gamma(x_n, t_n))`` with ``mu = |kappa(x_n, t_n)|``
  at space-time points chosen on a ladder of windows ``t <= T - delta_n``.

The verdict compares ``sqrt(2 (T - t)) max|kappa|`` over the last decade of
``T - t`` before the halt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .diagnostics import series_array
from .geometry import PlanarCurve, compute_frames, length, segment_lengths

__all__ = [
    "TEstimate",
    "BlowupFrame",
    "SingularityReport",
    "Thresholds",
    "ShrinkerDistance",
    "estimate_T",
    "rescaled_sup",
    "rescale_typeI",
    "junction_midpoint",
    "hamilton_rescale",
    "translator_residual",
    "hausdorff",
    "shrinker_distance",
    "classify",
    "VERDICTS",
]

VERDICTS = ("TypeI", "TypeII", "JunctionCollision", "Extinction", "Unresolved")
EXTINCTION_HALTS = ("length",)


class UnresolvedError(ValueError):
    pass


@dataclass(frozen=True)
class TEstimate:
    """Singular-time estimate.

    ``T_area`` is the extinction time predicted by the area law
    ``dA/dt = -2 |int kappa ds|`` (meaningless once the signed area of an
    immersed run is negative).  ``T_fit`` extrapolates ``1 / max|kappa|^2``
    linearly to zero over the tail.  ``T_halt`` is the event-specific
    extrapolation used when the run stops before extinction (lobe area or
    junction gap reaching zero).  ``T_est`` is the value used for rescaling.
    """

    T_est: float
    T_area: float
    T_fit: float
    T_halt: float | None
    before_extinction: bool
    source: str

    @property
    def disagreement(self) -> float:
        """Relative gap between the area-law and curvature-fit times."""
        return abs(self.T_area - self.T_fit) / max(abs(self.T_area), 1e-300)


def _tail(n: int, fraction: float = 0.3, minimum: int = 5) -> slice:
    k = max(minimum, int(np.ceil(fraction * n)))
    return slice(max(0, n - k), n)


def _linear_zero(t, v):
    """Time where the least-squares line through (t, v) reaches zero."""
    slope, icpt = np.polyfit(t, v, 1)
    if slope >= 0:
        return np.inf
    return float(-icpt / slope)


def estimate_T(series, halt_reason: str = "", min_samples: int = 10) -> TEstimate:
    """Estimate the singular time of a run from its record series.

    The area law is used for runs that end by extinction, including any halt
    with less than 1% of the initial area left.  For halts before extinction
    (``V+ exhausted``, ``junction_gap``, ``kappa_max`` with area left) the
    event quantity itself is extrapolated to zero.
    """
    t = series_array(series, "t")
    area = series_array(series, "area")
    if t.size < min_samples:
        raise UnresolvedError("fewer than the required area samples")
    if np.any(np.diff(area) > 1e-12 * max(1.0, abs(area[0]))):
        raise UnresolvedError("area is not monotone")
    turning = abs(series_array(series, "int_kappa")[-1])
    T_area = float(t[-1] + area[-1] / (2.0 * turning))
    kmax = series_array(series, "max_abs_kappa")
    tail = _tail(t.size)
    T_fit = _linear_zero(t[tail], 1.0 / kmax[tail] ** 2)

    T_halt = None
    source = "area"
    # a halt with (almost) no area left is extinction whatever stop fired
    exhausted = abs(area[-1]) <= 1e-2 * abs(area[0])
    if halt_reason == "V+ exhausted":
        vp = series_array(series, "v_plus")
        ok = np.isfinite(vp)
        if ok.sum() >= 2:
            tt, vv = t[ok], vp[ok]
            rate = (vv[-1] - vv[-2]) / (tt[-1] - tt[-2])
            T_halt = float(tt[-1] + vv[-1] / -rate) if rate < 0 else float(t[-1])
            T_halt = max(T_halt, float(t[-1]))
        else:
            T_halt = float(t[-1])
        source = "lobe"
    elif halt_reason == "junction_gap" and not exhausted:
        gap = series_array(series, "junction_gap")
        T_halt = max(_linear_zero(t[tail], gap[tail]), float(t[-1]))
        source = "gap"
    elif halt_reason not in EXTINCTION_HALTS and not exhausted:
        T_halt = max(T_fit, float(t[-1]))
        source = "fit"
    T_est = T_area if T_halt is None else T_halt
    return TEstimate(T_est=T_est, T_area=T_area, T_fit=T_fit, T_halt=T_halt,
                     before_extinction=T_halt is not None, source=source)


def rescaled_sup(series, T_est: float) -> tuple[np.ndarray, np.ndarray]:
    """``(T - t, sqrt(2 (T - t)) max|kappa|)`` for samples with ``t < T``."""
    t = series_array(series, "t")
    k = series_array(series, "max_abs_kappa")
    keep = t < T_est
    tau = T_est - t[keep]
    return tau, np.sqrt(2.0 * tau) * k[keep]


@dataclass(frozen=True)
class BlowupFrame:
    curve: PlanarCurve
    mode: str
    scale: float
    center: tuple
    source_t: float
    rung: int | None = None
    pick_index: int | None = None


def junction_midpoint(nodes) -> tuple:
    """Midpoint of the segment joining the two junctions (both on the axis)."""
    p = np.asarray(nodes, dtype=float)
    return (0.5 * (p[0, 0] + p[-1, 0]), 0.0)


def rescale_typeI(frames, T_est: float, p=None) -> list[BlowupFrame]:
    """Frames ``(gamma - p) / sqrt(2 (T_est - t))``.

    ``p`` defaults to the junction midpoint of the last frame.
    """
    if p is None:
        p = junction_midpoint(frames[-1][1])
    p = np.asarray(p, dtype=float)
    out = []
    for t, nodes in frames:
        if not t < T_est:
            raise ValueError("frame time not before T_est")
        s = 1.0 / np.sqrt(2.0 * (T_est - t))
        out.append(BlowupFrame(PlanarCurve((np.asarray(nodes) - p) * s), "typeI", float(s),
                               (float(p[0]), float(p[1])), float(t)))
    return out


def hamilton_rescale(frames, T_est: float, rungs: int = 8, ratio: float = 0.5,
                     delta0: float | None = None) -> list[BlowupFrame]:
    """Curvature-normalized blow-up frames on a geometric ladder of windows.

    Rung ``n`` uses the window ``t <= T_est - delta_n`` with
    ``delta_n = delta0 ratio^n`` (``delta0`` defaults to half the time span
    of the frames).  The pick maximizes ``max|kappa(t)| sqrt(T_est - delta_n - t)``;
    the emitted frame is ``mu (gamma - gamma(x_n))`` with ``mu = |kappa(x_n)|``.
    Rungs with an empty window are skipped.
    """
    times = np.array([f[0] for f in frames], dtype=float)
    if delta0 is None:
        delta0 = 0.5 * (T_est - times[0])
    kappas = [np.abs(compute_frames(PlanarCurve(f[1])).kappa) for f in frames]
    kmax = np.array([k.max() for k in kappas])
    out = []
    for n in range(1, rungs + 1):
        delta = delta0 * ratio ** n
        window = np.flatnonzero(times <= T_est - delta)
        if window.size == 0:
            continue
        score = kmax[window] * np.sqrt(T_est - delta - times[window])
        j = int(window[np.argmax(score)])
        i = int(np.argmax(kappas[j]))
        mu = float(kappas[j][i])
        nodes = np.asarray(frames[j][1], dtype=float)
        center = nodes[i].copy()
        out.append(BlowupFrame(PlanarCurve((nodes - center) * mu), "hamilton", mu,
                               (float(center[0]), float(center[1])), float(times[j]),
                               rung=n, pick_index=i))
    return out


def translator_residual(curve: PlanarCurve, center=None, radius: float | None = None):
    """Least-squares fit of ``kappa = <V, nu>``.

    Returns ``(residual, V)`` with the residual
    ``min_V int (kappa - <V, nu>)^2 ds / int kappa^2 ds``, or ``("flat", None)``
    when the curvature vanishes.  With ``radius`` only nodes within that
    distance of ``center`` (default the origin) enter the integrals.
    """
    fr = compute_frames(curve)
    w = fr.ds.copy()
    if radius is not None:
        c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        w = np.where(np.hypot(*(curve.nodes - c).T) <= radius, w, 0.0)
    kk = float(np.sum(w * fr.kappa ** 2))
    if kk <= 1e-14 * max(float(np.sum(w)), 1e-300):
        return "flat", None
    sw = np.sqrt(w)
    v, *_ = np.linalg.lstsq(fr.nu * sw[:, None], fr.kappa * sw, rcond=None)
    r = fr.kappa - fr.nu @ v
    return float(np.sum(w * r ** 2) / kk), v


def _densify(nodes, pieces: int = 8) -> np.ndarray:
    p = np.asarray(nodes, dtype=float)
    s = np.linspace(0.0, 1.0, pieces, endpoint=False)
    seg = p[:-1, None, :] + s[None, :, None] * np.diff(p, axis=0)[:, None, :]
    return np.vstack([seg.reshape(-1, 2), p[-1:]])


def hausdorff(a: PlanarCurve, b: PlanarCurve, pieces: int = 8) -> float:
    """Symmetric Hausdorff distance between densified polylines."""
    pa, pb = _densify(a.nodes, pieces), _densify(b.nodes, pieces)
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])


@dataclass(frozen=True)
class ShrinkerDistance:
    hausdorff: float
    angle: float
    kappa: float

    @property
    def total(self) -> float:
        """Hausdorff plus tangent-angle discrepancy (curvature reported only)."""
        return self.hausdorff + self.angle


def _resample(curve: PlanarCurve, m: int):
    s = np.concatenate([[0.0], np.cumsum(segment_lengths(curve))])
    u = np.linspace(0.0, s[-1], m)
    th = np.unwrap(np.arctan2(*np.diff(curve.nodes, axis=0).T[::-1]))
    mid = 0.5 * (s[:-1] + s[1:])
    k = compute_frames(curve).kappa
    return np.interp(u, mid, th), np.interp(u, s, k) * s[-1]


def shrinker_distance(frame: PlanarCurve, profile, m: int = 400) -> ShrinkerDistance:
    """Distance of a rescaled frame to the shrinker profile curve.

    The frame is shifted horizontally so its junction midpoint sits at the
    origin.  The angle and curvature terms compare the two curves at equal
    arclength fractions (curvature scaled by the curve length).
    """
    target = profile.curve(m) if not isinstance(profile, PlanarCurve) else profile
    shift = junction_midpoint(frame.nodes)
    moved = PlanarCurve(frame.nodes - np.array([shift[0], 0.0]))
    h = hausdorff(moved, target)
    th_a, k_a = _resample(moved, m)
    th_b, k_b = _resample(target, m)
    return ShrinkerDistance(float(h), float(np.max(np.abs(th_a - th_b))),
                            float(np.max(np.abs(k_a / length(moved) - k_b / length(target)))))


@dataclass(frozen=True)
class Thresholds:
    """Verdict thresholds over the last decade of ``T - t``."""

    flat_drift: float = 0.2
    growth: float = 3.0
    min_tail: int = 5
    kappa_growth_bound: float = 10.0


@dataclass
class SingularityReport:
    verdict: str
    T_est: float | None
    estimate: TEstimate | None = None
    drift: float | None = None
    evidence: dict = field(default_factory=dict)
    note: str = ""


def _decade_change(tau, rs, min_tail):
    """Ratio of rescaled_sup at the end of the last decade to its start."""
    order = np.argsort(tau)
    tau, rs = tau[order], rs[order]
    lo = tau[0]
    sel = tau <= 10.0 * lo
    if sel.sum() < min_tail or tau[-1] < 10.0 * lo:
        return None
    start = float(np.interp(np.log(10.0 * lo), np.log(tau), rs))
    return float(rs[0] / start)


def classify(series, frames=None, halt_reason: str = "",
             thresholds: Thresholds = Thresholds(), profile=None,
             hamilton_rungs: int = 0, translator_radius: float = 3.0) -> SingularityReport:
    """Classify the singular behaviour at the end of a run.

    Order of tests: junction collision (gap stop with ``max|kappa|`` staying
    within ``kappa_growth_bound`` times its initial value), then the
    rescaled-sup tail (flat -> TypeI, growth beyond ``growth`` -> TypeII),
    then extinction with bounded rescaled sup when the tail is too short.
    """
    try:
        est = estimate_T(series, halt_reason)
    except UnresolvedError as exc:
        return SingularityReport("Unresolved", None, note=str(exc))
    evidence = {}
    kmax = series_array(series, "max_abs_kappa")
    evidence["junction_gap"] = series_array(series, "junction_gap")
    tau, rs = rescaled_sup(series, est.T_est)
    evidence["tau"], evidence["rescaled_sup"] = tau, rs

    if frames and profile is not None and not est.before_extinction:
        late = [f for f in frames if f[0] < est.T_est]
        evidence["shrinker_distance"] = np.array(
            [shrinker_distance(b.curve, profile).total for b in rescale_typeI(late, est.T_est)])
    if frames and hamilton_rungs:
        rungs = hamilton_rescale(frames, est.T_est, hamilton_rungs)
        evidence["translator_residual"] = np.array(
            [np.nan if isinstance(r, str) else r
             for r, _ in (translator_residual(b.curve, radius=translator_radius) for b in rungs)])
        evidence["hamilton_mu"] = np.array([b.scale for b in rungs])

    bounded_kappa = kmax[-1] <= thresholds.kappa_growth_bound * kmax[0]
    if halt_reason == "junction_gap" and bounded_kappa:
        return SingularityReport("JunctionCollision", est.T_est, est, None, evidence,
                                 "halt before extinction" if est.before_extinction else "")
    change = _decade_change(tau, rs, thresholds.min_tail)
    note = "halt before extinction" if est.before_extinction else ""
    if change is None:
        bounded_rs = rs.size > 0 and rs[-1] <= thresholds.growth * np.median(rs)
        if halt_reason in EXTINCTION_HALTS and bounded_rs:
            return SingularityReport("Extinction", est.T_est, est, None, evidence, note)
        return SingularityReport("Unresolved", est.T_est, est, None, evidence,
                                 "insufficient tail samples")
    drift = change - 1.0
    if abs(drift) < thresholds.flat_drift:
        verdict = "TypeI"
    elif change > thresholds.growth:
        verdict = "TypeII"
    else:
        verdict = "Unresolved"
    return SingularityReport(verdict, est.T_est, est, drift, evidence, note)
