import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lensflow.embedding import MIRROR, SELF, embed_ratio, first_self_intersection, segments_cross
from lensflow.geometry import PlanarCurve, scale, translate
from oracles import brute_embed_ratio, random_embedded_curve
from support import lens_arc


class TestSegmentsCross:
    def test_proper_crossing(self):
        a, b = np.array([0.0, 0.0]), np.array([1.0, 1.0])
        assert segments_cross(a, b, np.array([0.0, 1.0]), np.array([1.0, 0.0]))

    def test_touching_at_chord_ends_does_not_count(self):
        a, b = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        assert not segments_cross(a, b, np.array([0.0, 0.0]), np.array([0.0, 1.0]))
        assert not segments_cross(a, b, np.array([1.0, 0.0]), np.array([2.0, 1.0]))

    def test_segment_end_inside_chord_counts(self):
        a, b = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        assert segments_cross(a, b, np.array([0.5, 0.0]), np.array([0.5, 1.0]))

    def test_disjoint(self):
        a, b = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        assert not segments_cross(a, b, np.array([0.0, 1.0]), np.array([1.0, 1.0]))


class TestEmbedRatio:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        nodes = random_embedded_curve(rng, int(rng.integers(12, 60)))
        got = embed_ratio(PlanarCurve(nodes))
        q1, q2, g = brute_embed_ratio(nodes)
        assert got.q1 == pytest.approx(q1, rel=1e-12)
        assert got.q2 == pytest.approx(q2, rel=1e-12)
        assert got.g == pytest.approx(g, rel=1e-12)

    def test_self_intersection_gives_zero(self):
        t = np.linspace(0.0, 1.0, 41)
        x = t + 0.6 * np.sin(2 * np.pi * t)
        y = 0.5 * np.sin(np.pi * t) + 0.3 * np.sin(2 * np.pi * t) ** 2
        nodes = np.column_stack([x, y])
        nodes[[0, -1], 1] = 0.0
        assert first_self_intersection(nodes) is not None
        r = embed_ratio(PlanarCurve(nodes))
        assert r.g == 0.0 and r.witness[0] == 0

    def test_touching_axis_gives_zero(self):
        x = np.linspace(0.0, 1.0, 41)
        y = np.abs(np.sin(2 * np.pi * x)) * 0.3
        y[[0, 20, 40]] = 0.0
        r = embed_ratio(PlanarCurve(np.column_stack([x, y])))
        assert r.g == 0.0 and r.witness == (0, 20, 20)

    def test_witness_kind_reports_the_minimum(self):
        r = embed_ratio(lens_arc(np.pi / 3, 60))
        assert r.witness[0] in (SELF, MIRROR)
        assert r.g == min(r.q1, r.q2)
        if r.witness[0] == SELF:
            assert r.q1 <= r.q2 * (1 + 1e-9)


@st.composite
def embedded(draw):
    seed = draw(st.integers(0, 10_000))
    n = draw(st.integers(10, 40))
    return PlanarCurve(random_embedded_curve(np.random.default_rng(seed), n))


class TestProperties:
    @given(embedded(), st.floats(0.05, 20.0))
    def test_scale_invariant(self, c, lam):
        assert embed_ratio(scale(c, lam)).g == pytest.approx(embed_ratio(c).g, rel=1e-9)

    @given(embedded(), st.floats(-3.0, 3.0))
    def test_horizontal_translation_invariant(self, c, dx):
        assert embed_ratio(translate(c, (dx, 0.0))).g == pytest.approx(embed_ratio(c).g, rel=1e-9)

    @given(embedded())
    def test_positive_on_embedded_curves(self, c):
        assert embed_ratio(c).g > 0
