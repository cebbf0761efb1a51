import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from lensflow.geometry import turning_integral
from lensflow.initial_data import (
    FAMILIES, InvalidScenarioError, ScenarioSpec, bc_angles, build, bump, validate,
)

CURVE_CASES = [
    ("convex_lens", {}),
    ("convex_lens", {"shape": "poly", "bulge": 0.3}),
    ("convex_lens", {"scale": 2.5}),
    ("perturbed_lens", {}),
    ("double_bubble", {}),
    ("double_bubble", {"shape": "arc"}),
]


class TestCurveFamilies:
    @pytest.mark.parametrize("family,params", CURVE_CASES)
    def test_compatible_and_embedded(self, family, params):
        curve = build(ScenarioSpec(family, params, 400))
        report = validate(curve, bc_angles(family))
        assert report.passes(1e-9)
        assert report.embedded
        assert report.min_y_interior > 0

    @pytest.mark.parametrize("family,params", CURVE_CASES)
    def test_turning_matches_prescribed_angles(self, family, params):
        curve = build(ScenarioSpec(family, params, 400))
        a0, a1 = bc_angles(family)
        assert turning_integral(curve, a0, a1) == pytest.approx(a1 - a0, abs=1e-9)

    def test_double_bubble_angles(self):
        assert bc_angles("double_bubble") == (2 * np.pi / 3, -2 * np.pi / 3)
        assert bc_angles("convex_lens") == (np.pi / 3, -np.pi / 3)

    def test_perturbed_lens_is_nonconvex(self):
        curve = build(ScenarioSpec("perturbed_lens", {}, 400))
        d = np.diff(curve.nodes, axis=0)
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        assert np.any(cross > 0) and np.any(cross < 0)

    def test_validate_flags_wrong_angles(self):
        curve = build(ScenarioSpec("convex_lens", {}, 200))
        assert not validate(curve, (np.pi / 4, -np.pi / 4)).passes()


@pytest.fixture(scope="module")
def datum():
    return build(ScenarioSpec("graph_example1", {"eps": 0.05, "c": 0.3}))


class TestGraphDatum:
    def test_lobes_against_adaptive_quadrature(self, datum):
        plus = quad(datum.f, 0.0, datum.x1, points=datum.breaks, epsabs=1e-13, limit=200)[0]
        minus = -quad(datum.f, datum.x1, datum.x2, points=datum.breaks, epsabs=1e-13, limit=200)[0]
        right = quad(datum.f, datum.x2, 1.0, points=datum.breaks, epsabs=1e-13, limit=200)[0]
        assert plus == pytest.approx(0.05, abs=1e-8)
        assert minus == pytest.approx(0.3, abs=1e-8)
        assert right == pytest.approx(plus, abs=1e-10)

    def test_sign_pattern(self, datum):
        x = np.linspace(0, 1, 20001)[1:-1]
        s = np.sign(datum.f(x))
        changes = x[1:][s[1:] != s[:-1]]
        assert len(changes) == 2
        assert s[0] > 0 and s[len(s) // 2] < 0 and s[-1] > 0
        assert changes[0] == pytest.approx(datum.x1, abs=1e-4)

    def test_boundary_data(self, datum):
        assert np.allclose(datum.f(np.array([0.0, 1.0])), 0.0, atol=1e-15)
        assert np.allclose(datum.fx(np.array([0.0, 1.0])), [np.sqrt(3), -np.sqrt(3)], atol=1e-14)
        assert datum.x1 + datum.x2 == pytest.approx(1.0, abs=1e-14)

    def test_derivative_matches_difference_quotient(self, datum):
        x = np.linspace(0.01, 0.99, 37)
        h = 1e-6
        fd = (datum.f(x + h) - datum.f(x - h)) / (2 * h)
        assert np.allclose(datum.fx(x), fd, atol=1e-6)

    @pytest.mark.parametrize("eps,c", [(0.02, 0.2), (0.08, 0.5)])
    def test_other_parameters(self, eps, c):
        d = build(ScenarioSpec("graph_example1", {"eps": eps, "c": c}))
        plus, minus = d.lobe_areas()
        assert plus == pytest.approx(eps, abs=1e-10)
        assert minus == pytest.approx(c, abs=1e-10)


class TestInvalidSpecs:
    def test_unknown_family(self):
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("triangle")

    def test_low_resolution(self):
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("convex_lens", n=16)

    def test_unknown_parameter(self):
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("convex_lens", {"amplitude": 1.0})

    def test_bump_outside_interval(self):
        with pytest.raises(InvalidScenarioError):
            build(ScenarioSpec("perturbed_lens", {"center": 0.1, "width": 0.2}))

    def test_bump_through_axis(self):
        with pytest.raises(InvalidScenarioError):
            build(ScenarioSpec("perturbed_lens", {"amplitude": -3.0}))

    @pytest.mark.parametrize("eps,c", [(0.0, 0.3), (0.05, 0.0), (0.0, 0.0)])
    def test_flat_graph_rejected(self, eps, c):
        with pytest.raises(InvalidScenarioError):
            build(ScenarioSpec("graph_example1", {"eps": eps, "c": c}))

    def test_unreachable_graph(self):
        with pytest.raises(InvalidScenarioError):
            build(ScenarioSpec("graph_example1", {"eps": 5.0, "c": 0.3}))

    def test_every_family_listed(self):
        assert set(FAMILIES) == {"convex_lens", "perturbed_lens", "graph_example1", "double_bubble"}


class TestBump:
    @given(st.floats(-3, 3))
    def test_support_and_peak(self, x):
        v = float(bump(x, 0.5, 0.2))
        assert 0.0 <= v <= 1.0
        if abs(x - 0.5) >= 0.2:
            assert v == 0.0

    def test_peak_value(self):
        assert float(bump(0.5, 0.5, 0.2)) == 1.0
