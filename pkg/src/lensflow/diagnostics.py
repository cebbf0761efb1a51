"""Per-sample monitored quantities and post-hoc monotonicity certification."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.special import erfc

from .embedding import embed_ratio
from .geometry import (
    PlanarCurve,
    abs_turning_integral,
    compute_frames,
    length,
    signed_enclosed_area,
    turning_integral,
)

__all__ = [
    "DiagnosticsRecord",
    "SERIES_COLUMNS",
    "GRAPH_COLUMNS",
    "sample",
    "certify_monotone",
    "MonotoneReport",
    "huisken_functional",
    "series_array",
    "refinement_tol",
]

SERIES_COLUMNS = (
    "t", "length", "area", "int_kappa", "int_abs_kappa", "max_abs_kappa", "min_kappa",
    "max_kappa", "junction_gap", "g_embed", "huisken", "rescaled_sup",
)
GRAPH_COLUMNS = ("a", "b", "v_plus", "v_minus", "x1", "x2")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    length: float
    area: float
    int_kappa: float
    int_abs_kappa: float
    max_abs_kappa: float
    min_kappa: float
    max_kappa: float
    junction_gap: float
    g_embed: float | None = None
    huisken: float | None = None
    rescaled_sup: float | None = None
    a: float | None = None
    b: float | None = None
    v_plus: float | None = None
    v_minus: float | None = None
    x1: float | None = None
    x2: float | None = None

    def with_(self, **kw) -> "DiagnosticsRecord":
        return replace(self, **kw)

    def row(self, columns=SERIES_COLUMNS) -> list:
        return [getattr(self, c) for c in columns]


def sample(curve: PlanarCurve, t: float, angles=(np.pi / 3, -np.pi / 3),
           with_g: bool = False, **extra) -> DiagnosticsRecord:
    """All monitored quantities of one curve at time ``t``.

    ``angles`` are the prescribed endpoint tangent angles; the turning
    integrals include the half-turns between them and the end segments.
    """
    fr = compute_frames(curve)
    k = fr.kappa
    g = embed_ratio(curve).g if with_g else None
    return DiagnosticsRecord(
        t=float(t),
        length=length(curve),
        area=abs(signed_enclosed_area(curve)),
        int_kappa=turning_integral(curve, angles[0], angles[1]),
        int_abs_kappa=abs_turning_integral(curve, angles[0], angles[1]),
        max_abs_kappa=float(np.max(np.abs(k))),
        min_kappa=float(np.min(k)),
        max_kappa=float(np.max(k)),
        junction_gap=float(curve.nodes[-1, 0] - curve.nodes[0, 0]),
        g_embed=g,
        **extra,
    )


def series_array(records, field_name: str) -> np.ndarray:
    """Column of a record series as floats (missing values become NaN)."""
    return np.array([np.nan if getattr(r, field_name) is None else getattr(r, field_name)
                     for r in records], dtype=float)


@dataclass(frozen=True)
class MonotoneReport:
    ok: bool
    field: str
    direction: str
    worst_violation: float
    t_worst: float | None
    tol: float


def certify_monotone(series, field_name: str, direction: str = "nonincreasing",
                     tol=0.0) -> MonotoneReport:
    """Check a field is monotone up to ``tol`` per consecutive pair.

    ``series`` is a sequence of records or a pair ``(t, values)``.  ``tol``
    may be a scalar or an array of per-step tolerances.  Missing samples are
    skipped.
    """
    if isinstance(series, tuple) and len(series) == 2:
        t, v = (np.asarray(a, dtype=float) for a in series)
    else:
        t = series_array(series, "t")
        v = series_array(series, field_name)
    keep = np.isfinite(v)
    t, v = t[keep], v[keep]
    if v.size < 2:
        raise ValueError("need at least two samples")
    step = np.diff(v)
    if direction == "nonincreasing":
        excess = step
    elif direction == "nondecreasing":
        excess = -step
    else:
        raise ValueError(f"unknown direction {direction!r}")
    tol_arr = np.asarray(tol, dtype=float)
    if tol_arr.ndim:
        if tol_arr.size == keep.size - 1:
            tol_arr = tol_arr[keep[1:]]
        if tol_arr.size != excess.size:
            raise ValueError("per-step tol has the wrong length")
    tol_arr = np.broadcast_to(tol_arr, excess.shape)
    margin = excess - tol_arr
    k = int(np.argmax(margin))
    worst = float(max(excess[k], 0.0))
    ok = bool(margin[k] <= 0.0)
    return MonotoneReport(ok, field_name, direction, worst, float(t[k + 1]) if worst > 0 else None,
                          float(np.max(tol_arr)))


def refinement_tol(dt, h, c1: float = 1.0, c2: float = 1.0):
    """Per-step certification tolerance ``c1 dt + c2 h^2``."""
    return c1 * np.asarray(dt, dtype=float) + c2 * np.asarray(h, dtype=float) ** 2


def huisken_functional(curve: PlanarCurve, network: bool = False) -> float:
    """Gaussian-weighted length ``int exp(-|x|^2 / 2) ds`` by the trapezoid rule.

    With ``network=True`` the value covers the whole lens network: the curve,
    its mirror image and the two half-lines of the axis beyond the endpoints.
    """
    p = curve.nodes
    w = np.exp(-0.5 * np.sum(p * p, axis=1))
    seg = np.hypot(*np.diff(p, axis=0).T)
    value = float(np.sum(seg * 0.5 * (w[:-1] + w[1:])))
    if not network:
        return value
    root = np.sqrt(np.pi / 2)
    right = root * erfc(p[-1, 0] / np.sqrt(2.0)) * np.exp(-0.5 * p[-1, 1] ** 2)
    left = root * erfc(-p[0, 0] / np.sqrt(2.0)) * np.exp(-0.5 * p[0, 1] ** 2)
    return 2.0 * value + float(right + left)


def record_fields():
    return tuple(f.name for f in fields(DiagnosticsRecord))
