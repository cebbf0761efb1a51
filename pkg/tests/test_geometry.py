import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lensflow.geometry import (
    DegenerateCurveError,
    PlanarCurve,
    abs_turning_integral,
    compute_frames,
    endpoint_derivatives,
    enclosed_area,
    length,
    mirror,
    scale,
    signed_enclosed_area,
    translate,
    turning_integral,
)
from support import arc_curve, lens_arc


def polygon_lens_area(radius, beta, n):
    """Exact area between an inscribed arc polygon and its mirror image."""
    return radius ** 2 * (n * np.sin(2 * beta / n) - np.sin(2 * beta))


class TestPlanarCurve:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            PlanarCurve(np.zeros((5, 3)))
        with pytest.raises(ValueError):
            PlanarCurve(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            PlanarCurve(np.array([[0.0, 0.0], [1.0, np.nan], [2.0, 0.0]]))

    def test_zero_segment_reports_index(self):
        nodes = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
        with pytest.raises(DegenerateCurveError) as info:
            PlanarCurve(nodes)
        assert info.value.index == 1

    def test_nodes_are_read_only_copies(self):
        raw = np.array([[0.0, 0.0], [0.5, 1.0], [1.0, 0.0]])
        c = PlanarCurve(raw)
        raw[1, 1] = 5.0
        assert c.nodes[1, 1] == 1.0
        with pytest.raises(ValueError):
            c.nodes[0, 0] = 1.0

    def test_is_network(self):
        assert lens_arc(np.pi / 3, 20).is_network(1e-12)
        assert not arc_curve(1.0, 0.1, 1.0, 20).is_network()


class TestFrames:
    def test_circle_curvature(self):
        c = arc_curve(2.0, 0.0, np.pi, 400)
        fr = compute_frames(c)
        assert np.allclose(fr.kappa, 0.5, rtol=1e-4)
        assert np.allclose(np.hypot(*fr.tau.T), 1.0)
        assert np.allclose(np.einsum("ij,ij->i", fr.tau, fr.nu), 0.0)

    def test_lens_orientation_is_negative(self):
        fr = compute_frames(lens_arc(np.pi / 3, 200))
        assert np.all(fr.kappa < 0)

    def test_uniform_parametrization_has_no_tangential_speed(self):
        fr = compute_frames(arc_curve(1.0, 0.0, 2.0, 200))
        assert np.max(np.abs(fr.lam[1:-1])) < 1e-10

    def test_endpoint_tangent_matches_arc(self):
        beta = np.pi / 3
        fr = compute_frames(lens_arc(beta, 400))
        assert np.arctan2(fr.tau[0, 1], fr.tau[0, 0]) == pytest.approx(beta, abs=1e-5)
        assert np.arctan2(fr.tau[-1, 1], fr.tau[-1, 0]) == pytest.approx(-beta, abs=1e-5)

    def test_endpoint_derivatives_of_polynomial(self):
        x = np.linspace(0.0, 1.0, 401)
        nodes = np.column_stack([x + 0.1 * x ** 2, x - x ** 2 + 0.5 * x ** 3])
        (g0, gg0), (g1, gg1) = endpoint_derivatives(PlanarCurve(nodes))
        assert np.allclose(g0, [1.0, 1.0], atol=1e-9)
        assert np.allclose(gg0, [0.2, -2.0], atol=1e-7)
        assert np.allclose(g1, [1.2, 0.5], atol=1e-9)
        assert np.allclose(gg1, [0.2, 1.0], atol=1e-7)


class TestIntegrals:
    @pytest.mark.parametrize("n", [8, 50, 400])
    def test_area_matches_inscribed_polygon(self, n):
        beta = np.pi / 3
        assert enclosed_area(lens_arc(beta, n, 1.5)) == pytest.approx(
            polygon_lens_area(1.5, beta, n), rel=1e-12)

    def test_turning_with_prescribed_angles_is_exact(self):
        c = lens_arc(np.pi / 3, 137)
        assert turning_integral(c, np.pi / 3, -np.pi / 3) == -2 * np.pi / 3
        assert abs_turning_integral(c, np.pi / 3, -np.pi / 3) == pytest.approx(2 * np.pi / 3)

    def test_turning_counts_winding(self):
        sweep, n = 2 * np.pi - 0.3, 300
        c = arc_curve(1.0, 0.0, sweep, n)
        # without prescribed angles the tangents are the end segments
        assert turning_integral(c) == pytest.approx(sweep - sweep / n, abs=1e-12)

    def test_off_axis_area_rejected(self):
        with pytest.raises(ValueError):
            signed_enclosed_area(arc_curve(1.0, 0.2, 2.0, 30))

    def test_length_of_arc(self):
        n = 64
        assert length(arc_curve(1.0, 0.0, np.pi, n)) == pytest.approx(2 * n * np.sin(np.pi / (2 * n)))


@st.composite
def bumpy_lens(draw):
    n = draw(st.integers(16, 120))
    amps = draw(st.lists(st.floats(-0.15, 0.15), min_size=1, max_size=4))
    x = np.linspace(0.0, 1.0, n + 1)
    y = np.sin(np.pi * x) * (1.0 + sum(a * np.sin((k + 2) * np.pi * x) for k, a in enumerate(amps)))
    return PlanarCurve(np.column_stack([x, y]))


class TestProperties:
    @given(bumpy_lens(), st.floats(0.1, 10.0))
    def test_area_scales_quadratically(self, c, lam):
        assert signed_enclosed_area(scale(c, lam)) == pytest.approx(
            lam ** 2 * signed_enclosed_area(c), rel=1e-10)

    @given(bumpy_lens(), st.floats(-5.0, 5.0))
    def test_horizontal_translation_keeps_area_and_turning(self, c, dx):
        moved = translate(c, (dx, 0.0))
        assert signed_enclosed_area(moved) == pytest.approx(signed_enclosed_area(c), rel=1e-9, abs=1e-12)
        assert turning_integral(moved) == pytest.approx(turning_integral(c), abs=1e-12)

    @given(bumpy_lens())
    def test_mirror_flips_area_and_turning(self, c):
        assert signed_enclosed_area(mirror(c)) == pytest.approx(-signed_enclosed_area(c))
        assert turning_integral(mirror(c)) == pytest.approx(-turning_integral(c), abs=1e-12)

    @given(bumpy_lens())
    def test_reversal_flips_area(self, c):
        rev = PlanarCurve(c.nodes[::-1])
        assert signed_enclosed_area(rev) == pytest.approx(-signed_enclosed_area(c))

    @given(bumpy_lens())
    def test_abs_turning_bounds_turning(self, c):
        assert abs_turning_integral(c) >= abs(turning_integral(c)) - 1e-12
