import numpy as np
import pytest
from hypothesis import given, strategies as st

from lensflow.diagnostics import DiagnosticsRecord
from lensflow.geometry import PlanarCurve, compute_frames, scale
from lensflow.singularity import (
    UnresolvedError, classify, estimate_T, hamilton_rescale, hausdorff, junction_midpoint,
    rescale_typeI, rescaled_sup, shrinker_distance, translator_residual,
)
from support import arc_curve

TURN = 2 * np.pi / 3


def series(t, kmax, area=None, gap=None, v_plus=None):
    """Record list with the area law unless ``area`` is given."""
    t = np.asarray(t, dtype=float)
    kmax = np.broadcast_to(np.asarray(kmax, dtype=float), t.shape)
    if area is None:
        area = TURN * (1.0 - 2.0 * t)  # reaches zero at t = 1/2
    gap = np.ones_like(t) if gap is None else gap
    out = []
    for i in range(t.size):
        out.append(DiagnosticsRecord(
            t=t[i], length=1.0, area=float(area[i]), int_kappa=-TURN, int_abs_kappa=TURN,
            max_abs_kappa=float(kmax[i]), min_kappa=-float(kmax[i]), max_kappa=0.0,
            junction_gap=float(gap[i]),
            v_plus=None if v_plus is None else float(v_plus[i])))
    return out


def shrinker_times(n=200):
    # samples accumulating geometrically at T = 1/2
    return 0.5 - 0.5 * np.geomspace(1.0, 1e-4, n)


class TestEstimateT:
    def test_area_law_exact(self):
        t = shrinker_times()
        est = estimate_T(series(t, 1.0 / np.sqrt(1 - 2 * t)), "length")
        assert est.T_area == pytest.approx(0.5, abs=1e-12)
        assert est.T_est == est.T_area and not est.before_extinction
        assert est.T_fit == pytest.approx(0.5, rel=2e-2)
        assert est.disagreement < 2e-2

    def test_too_few_samples(self):
        with pytest.raises(UnresolvedError):
            estimate_T(series(np.linspace(0, 0.1, 5), 1.0))

    def test_area_not_monotone(self):
        t = np.linspace(0, 0.1, 20)
        area = TURN * (1 - 2 * t) + 0.1 * np.sin(60 * t)
        with pytest.raises(UnresolvedError):
            estimate_T(series(t, 1.0, area=area))

    def test_gap_extrapolation(self):
        t = np.linspace(0.0, 0.2, 40)
        est = estimate_T(series(t, 1.0, gap=0.3 - t), "junction_gap")
        assert est.before_extinction and est.source == "gap"
        assert est.T_halt == pytest.approx(0.3, abs=1e-12)
        assert est.T_area == pytest.approx(0.5, abs=1e-12)

    def test_gap_halt_at_extinction_uses_area(self):
        # gap ~ sqrt(T - t): a linear extrapolation would overshoot T
        t = shrinker_times()
        est = estimate_T(series(t, 1.0, gap=np.sqrt(1 - 2 * t)), "junction_gap")
        assert est.source == "area" and not est.before_extinction
        assert est.T_est == pytest.approx(0.5, abs=1e-12)

    def test_lobe_extrapolation(self):
        t = np.linspace(0.0, 0.2, 40)
        est = estimate_T(series(t, 1.0, v_plus=0.25 - t), "V+ exhausted")
        assert est.source == "lobe"
        assert est.T_est == pytest.approx(0.25, abs=1e-12)


class TestClassify:
    def test_self_similar_is_type_one(self):
        t = shrinker_times()
        rep = classify(series(t, 2.0 / np.sqrt(1 - 2 * t)), halt_reason="length")
        assert rep.verdict == "TypeI"
        assert abs(rep.drift) < 1e-6
        assert rep.T_est == pytest.approx(0.5, abs=1e-12)

    def test_fast_blowup_is_type_two(self):
        t = shrinker_times()
        rep = classify(series(t, 1.0 / (0.5 - t)), halt_reason="length")
        assert rep.verdict == "TypeII"
        assert rep.drift == pytest.approx(np.sqrt(10) - 1, rel=1e-3)

    def test_intermediate_growth_unresolved(self):
        t = shrinker_times()
        rep = classify(series(t, (0.5 - t) ** -0.7), halt_reason="length")
        assert rep.verdict == "Unresolved"

    def test_junction_collision(self):
        t = np.linspace(0.0, 0.2, 40)
        rep = classify(series(t, 1.0 + t, gap=0.2 - t + 1e-4), halt_reason="junction_gap")
        assert rep.verdict == "JunctionCollision"
        assert rep.T_est == pytest.approx(0.2 + 1e-4, abs=1e-10)

    def test_short_tail_extinction(self):
        t = np.linspace(0.0, 0.4, 30)  # T - t spans less than a decade
        rep = classify(series(t, 1.0 / np.sqrt(1 - 2 * t)), halt_reason="length")
        assert rep.verdict == "Extinction"

    def test_short_tail_without_extinction(self):
        t = np.linspace(0.0, 0.4, 30)
        rep = classify(series(t, 1.0 / np.sqrt(1 - 2 * t)), halt_reason="max_steps")
        assert rep.verdict == "Unresolved"

    def test_unresolved_on_bad_series(self):
        assert classify(series(np.linspace(0, 0.1, 4), 1.0)).verdict == "Unresolved"

    @given(st.floats(0.2, 5.0))
    def test_parabolic_scale_invariance(self, lam):
        t = shrinker_times(120)
        base = series(t, 2.0 / np.sqrt(1 - 2 * t))
        scaled = [r.with_(t=lam ** 2 * r.t, area=lam ** 2 * r.area,
                          max_abs_kappa=r.max_abs_kappa / lam) for r in base]
        a, b = classify(base, halt_reason="length"), classify(scaled, halt_reason="length")
        assert a.verdict == b.verdict
        assert b.T_est == pytest.approx(lam ** 2 * a.T_est, rel=1e-12)
        assert b.drift == pytest.approx(a.drift, abs=1e-9)

    def test_rescaled_sup(self):
        t = shrinker_times(50)
        tau, rs = rescaled_sup(series(t, 3.0 / np.sqrt(1 - 2 * t)), 0.5)
        assert np.allclose(tau, 0.5 - t)
        assert np.allclose(rs, 3.0)


class TestTranslator:
    def test_grim_reaper(self):
        x = np.linspace(-1.45, 1.45, 2001)
        reaper = PlanarCurve(np.column_stack([x, -np.log(np.cos(x))]))
        res, v = translator_residual(reaper)
        assert res < 1e-3
        assert abs(v[0]) < 1e-6 and abs(abs(v[1]) - 1.0) < 1e-3

    def test_circle_arc_closed_form(self):
        phi = 4 * np.pi / 3
        arc = arc_curve(1.0, np.pi / 2 + phi / 2, np.pi / 2 - phi / 2, 4000)
        res, v = translator_residual(arc)
        i1 = 2 * np.sin(phi / 2)
        i2 = phi / 2 + np.sin(phi) / 2
        assert res == pytest.approx(1 - i1 ** 2 / (phi * i2), abs=1e-5)
        assert res == pytest.approx(0.569, abs=1e-3)

    def test_flat(self):
        x = np.linspace(0, 1, 20)
        assert translator_residual(PlanarCurve(np.column_stack([x, 2 * x]))) == ("flat", None)

    def test_radius_restricts(self):
        # the reaper leaves the disc of radius 2 well before the joining corner
        x = np.linspace(-1.5, 1.5, 801)
        reaper = np.column_stack([x, -np.log(np.cos(x))])
        bend = arc_curve(0.5, np.pi, 0.0, 200, (30.0, 5.0)).nodes
        both = PlanarCurve(np.vstack([reaper, bend]))
        assert translator_residual(both, radius=2.0)[0] < 1e-3
        assert translator_residual(both)[0] > 1e-2


class TestRescalings:
    def test_type_one_recovers_profile(self, profile):
        base = profile.curve(200)
        frames = [(t, np.sqrt(1 - 2 * t) * base.nodes) for t in (0.0, 0.3, 0.45)]
        for b in rescale_typeI(frames, 0.5):
            assert np.allclose(b.curve.nodes, base.nodes, atol=1e-13)
            assert b.center == (0.0, 0.0)

    def test_type_one_center_shift(self):
        nodes = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
        (b,) = rescale_typeI([(0.375, nodes)], 0.5)
        assert junction_midpoint(nodes) == (2.0, 0.0)
        assert np.allclose(b.curve.nodes, (nodes - [2.0, 0.0]) * 2.0)

    def test_type_one_rejects_late_frame(self):
        with pytest.raises(ValueError):
            rescale_typeI([(0.5, np.eye(2))], 0.5)

    def test_hamilton_normalizes_curvature(self):
        frames = [(t, arc_curve(np.sqrt(1 - 2 * t), 2.5, 0.6, 100).nodes)
                  for t in np.linspace(0.0, 0.49, 30)]
        rungs = hamilton_rescale(frames, 0.5, rungs=5)
        assert len(rungs) == 5
        for b in rungs:
            k = np.abs(compute_frames(b.curve).kappa)
            assert k[b.pick_index] == pytest.approx(1.0, rel=1e-12)
            assert np.allclose(b.curve.nodes[b.pick_index], 0.0)
        # later rungs pick later frames
        assert np.all(np.diff([b.source_t for b in rungs]) >= 0)

    def test_hamilton_skips_empty_windows(self):
        frames = [(0.4, arc_curve(1.0, 2.5, 0.6, 50).nodes)]
        # windows t <= 0.25 and t <= 0.375 miss the only frame
        assert hamilton_rescale(frames, 0.5, rungs=2, delta0=0.5) == []


class TestShrinkerDistance:
    def test_self_distance_zero(self, profile):
        d = shrinker_distance(profile.curve(400), profile)
        assert d.total < 1e-12 and d.kappa < 1e-9

    def test_detects_scaling(self, profile):
        d = shrinker_distance(scale(profile.curve(400), 1.1), profile)
        assert d.total > 5e-2

    def test_shift_removed(self, profile):
        moved = PlanarCurve(profile.curve(400).nodes + [0.7, 0.0])
        assert shrinker_distance(moved, profile).total < 1e-12

    def test_hausdorff_parallel_segments(self):
        x = np.linspace(0, 1, 11)
        a = PlanarCurve(np.column_stack([x, 0 * x]))
        b = PlanarCurve(np.column_stack([x, 0 * x + 0.3]))
        assert hausdorff(a, b) == pytest.approx(0.3)
        assert hausdorff(a, b) == hausdorff(b, a)
