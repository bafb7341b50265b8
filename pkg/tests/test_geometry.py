import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contourfit.errors import DegenerateQuintuple, NotAnEllipse
from contourfit.geometry import (
    Conic,
    Ellipse,
    conic_to_ellipse,
    contains_point,
    ellipse_to_conic,
    fit_conic_five_points,
    is_ellipse,
    ray_intersect,
    wrap_axis_angle,
)


def random_ellipse(rng) -> Ellipse:
    major = rng.uniform(0.5, 10.0)
    minor = major * rng.uniform(0.2, 0.95)
    return Ellipse(
        cx=rng.uniform(-50.0, 50.0),
        cy=rng.uniform(-50.0, 50.0),
        major=major,
        minor=minor,
        angle=rng.uniform(-math.pi / 2, math.pi / 2),
    )


def angle_gap(a, b, period=math.pi):
    d = abs(a - b) % period
    return min(d, period - d)


# ---------------------------------------------------------------------------
# fit_conic_five_points
# ---------------------------------------------------------------------------

class TestFivePointFit:
    def test_unit_circle_from_symmetric_points(self):
        s = math.sqrt(2.0) / 2.0
        pts = [(1, 0), (0, 1), (-1, 0), (0, -1), (s, s)]
        conic = fit_conic_five_points(pts)
        expected = np.array([1, 0, 1, 0, 0, -1], float)
        got = conic.coeffs()
        # fix an overall sign before comparing
        if got[0] * expected[0] < 0:
            got = -got
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_collinear_points_degenerate(self):
        pts = [(k, 0.0) for k in range(5)]
        with pytest.raises(DegenerateQuintuple):
            fit_conic_five_points(pts)

    def test_repeated_point_degenerate(self):
        pts = [(1, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]
        with pytest.raises(DegenerateQuintuple):
            fit_conic_five_points(pts)

    def test_residuals_on_ellipse_samples(self):
        # points at parameter angles 0..4 rad on x^2/4 + y^2 = 1
        t = np.arange(5.0)
        pts = np.column_stack([2.0 * np.cos(t), np.sin(t)])
        conic = fit_conic_five_points(pts)
        residuals = conic.evaluate(pts[:, 0], pts[:, 1])
        assert np.max(np.abs(residuals)) < 1e-9

    def test_residuals_survive_pixel_scale_offsets(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            e = random_ellipse(rng)
            shifted = Ellipse(e.cx + 500.0, e.cy + 400.0, 40 * e.major, 40 * e.minor, e.angle)
            pts = shifted.boundary(rng.uniform(0, 2 * math.pi, 5))
            conic = fit_conic_five_points(pts)
            assert np.max(np.abs(conic.evaluate(pts[:, 0], pts[:, 1]))) < 1e-9

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            fit_conic_five_points([(0, 0), (1, 1)])


# ---------------------------------------------------------------------------
# is_ellipse
# ---------------------------------------------------------------------------

class TestIsEllipse:
    def test_unit_circle(self):
        assert is_ellipse(Conic(1, 0, 1, 0, 0, -1))

    def test_hyperbola(self):
        assert not is_ellipse(Conic(1, 0, -1, 0, 0, -1))

    def test_imaginary_ellipse(self):
        # discriminant is negative but the conic has no real points
        assert not is_ellipse(Conic(1, 0, 1, 0, 0, 1))

    def test_parabola(self):
        assert not is_ellipse(Conic(1, 0, 0, 0, -1, 0))

    @given(st.floats(min_value=-1e3, max_value=1e3).filter(lambda s: abs(s) > 1e-6))
    def test_scale_invariance(self, scale):
        base = (2.0, 0.3, 1.0, -0.5, 0.25, -3.0)
        scaled = tuple(scale * v for v in base)
        assert is_ellipse(Conic(*base)) == is_ellipse(Conic(*scaled))


# ---------------------------------------------------------------------------
# conic_to_ellipse
# ---------------------------------------------------------------------------

class TestConicToEllipse:
    def test_completed_squares_circle(self):
        e = conic_to_ellipse(Conic(1, 0, 1, -2, 2, -2))
        assert e.cx == pytest.approx(1.0)
        assert e.cy == pytest.approx(-1.0)
        assert e.major == pytest.approx(2.0)
        assert e.minor == pytest.approx(2.0)
        assert e.angle == 0.0

    def test_axis_aligned(self):
        e = conic_to_ellipse(Conic(1 / 9, 0, 1 / 4, 0, 0, -1))
        assert (e.cx, e.cy) == (pytest.approx(0.0), pytest.approx(0.0))
        assert e.major == pytest.approx(3.0)
        assert e.minor == pytest.approx(2.0)
        assert e.angle == pytest.approx(0.0)

    def test_rotated_round_trip_from_five_points(self):
        truth = Ellipse(0.0, 0.0, 2.0, 1.0, math.pi / 4)
        t = np.array([0.1, 1.3, 2.9, 4.2, 5.6])
        conic = fit_conic_five_points(truth.boundary(t))
        e = conic_to_ellipse(conic)
        assert abs(e.cx) < 1e-8 and abs(e.cy) < 1e-8
        assert e.major == pytest.approx(2.0, abs=1e-8)
        assert e.minor == pytest.approx(1.0, abs=1e-8)
        assert angle_gap(e.angle, math.pi / 4) < 1e-8

    def test_boundary_satisfies_source_conic(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            conic = ellipse_to_conic(random_ellipse(rng))
            e = conic_to_ellipse(conic)
            pts = e.boundary(np.linspace(0, 2 * math.pi, 360, endpoint=False))
            assert np.max(np.abs(conic.evaluate(pts[:, 0], pts[:, 1]))) < 1e-8

    def test_rejects_hyperbola(self):
        with pytest.raises(NotAnEllipse):
            conic_to_ellipse(Conic(1, 0, -1, 0, 0, -1))

    def test_rejects_imaginary(self):
        with pytest.raises(NotAnEllipse):
            conic_to_ellipse(Conic(1, 0, 1, 0, 0, 1))

    def test_scale_invariance(self):
        base = ellipse_to_conic(Ellipse(1.0, 2.0, 3.0, 1.5, 0.7))
        for s in (-2.0, 0.001, 37.0):
            scaled = Conic(*(s * base.coeffs()))
            a = conic_to_ellipse(base).params()
            b = conic_to_ellipse(scaled).params()
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


class TestRoundTrip:
    def test_thousand_random_ellipses(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            truth = random_ellipse(rng)
            t = rng.uniform(0, 2 * math.pi, 5)
            # spread parameters out enough to avoid near-coincident points
            while np.min(np.diff(np.sort(np.concatenate([t, t[:1] + 2 * math.pi])))) < 0.15:
                t = rng.uniform(0, 2 * math.pi, 5)
            conic = fit_conic_five_points(truth.boundary(t))
            e = conic_to_ellipse(conic)
            assert abs(e.cx - truth.cx) < 1e-6
            assert abs(e.cy - truth.cy) < 1e-6
            assert abs(e.major - truth.major) < 1e-6
            assert abs(e.minor - truth.minor) < 1e-6
            assert angle_gap(e.angle, truth.angle) < 1e-6


# ---------------------------------------------------------------------------
# ray_intersect
# ---------------------------------------------------------------------------

class TestRayIntersect:
    def test_unit_circle_center_ray(self):
        e = Ellipse(0, 0, 1, 1, 0)
        for theta in np.linspace(0, 2 * math.pi, 16, endpoint=False):
            np.testing.assert_allclose(ray_intersect(e, (0, 0), theta), [1.0], atol=1e-12)

    def test_axis_lengths(self):
        e = Ellipse(0, 0, 2, 1, 0)
        np.testing.assert_allclose(ray_intersect(e, (0, 0), 0.0), [2.0], atol=1e-12)
        np.testing.assert_allclose(ray_intersect(e, (0, 0), math.pi / 2), [1.0], atol=1e-12)

    def test_offset_origin_two_hits(self):
        e = Ellipse(1, 0, 1, 1, 0)
        np.testing.assert_allclose(ray_intersect(e, (0.5, 0), 0.0), [1.5], atol=1e-12)
        # ray pointing backwards exits through the near boundary only
        np.testing.assert_allclose(ray_intersect(e, (0.5, 0), math.pi), [0.5], atol=1e-12)

    def test_exterior_origin(self):
        e = Ellipse(0, 0, 1, 1, 0)
        np.testing.assert_allclose(ray_intersect(e, (-3, 0), 0.0), [2.0, 4.0], atol=1e-12)
        assert ray_intersect(e, (-3, 0), math.pi).size == 0

    def test_miss_returns_empty(self):
        e = Ellipse(0, 0, 1, 1, 0)
        assert ray_intersect(e, (0, 5), 0.0).size == 0

    def test_hits_satisfy_conic(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            e = random_ellipse(rng)
            origin = np.array([e.cx, e.cy]) + rng.normal(0, e.major, 2)
            theta = rng.uniform(0, 2 * math.pi)
            conic = ellipse_to_conic(e)
            for r in ray_intersect(e, origin, theta):
                x = origin[0] + r * math.cos(theta)
                y = origin[1] + r * math.sin(theta)
                assert abs(conic.evaluate(x, y)) < 1e-9


# ---------------------------------------------------------------------------
# contains_point
# ---------------------------------------------------------------------------

class TestContainsPoint:
    def test_center_inside(self):
        assert contains_point(Ellipse(0, 0, 1, 1, 0), (0, 0))

    def test_far_point_outside(self):
        assert not contains_point(Ellipse(0, 0, 1, 1, 0), (2, 0))

    def test_boundary_not_inside(self):
        assert not contains_point(Ellipse(0, 0, 1, 1, 0), (1.0, 0.0))

    def test_rotated_frame_evaluation(self):
        e = Ellipse(0, 0, 2, 1, math.pi / 4)
        for p in [np.array([1.2, 1.2]), np.array([1.2, -1.2]), np.array([0.4, -0.1])]:
            # oracle: rotate the point into the ellipse frame and evaluate
            c, s = math.cos(e.angle), math.sin(e.angle)
            fx = c * p[0] + s * p[1]
            fy = -s * p[0] + c * p[1]
            inside = (fx / e.major) ** 2 + (fy / e.minor) ** 2 < 1
            assert contains_point(e, p) == inside
        # along the major axis at radius ~1.697 < 2: inside; perpendicular: outside
        assert contains_point(e, (1.2, 1.2))
        assert not contains_point(e, (1.2, -1.2))

    @settings(max_examples=200)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_center_always_inside(self, seed):
        e = random_ellipse(np.random.default_rng(seed))
        assert contains_point(e, (e.cx, e.cy))


# ---------------------------------------------------------------------------
# construction and canonicalization
# ---------------------------------------------------------------------------

class TestTypes:
    def test_conic_normalized(self):
        c = Conic(2, 0, 2, 0, 0, -8)
        assert max(abs(v) for v in c.coeffs()) == pytest.approx(1.0)

    def test_zero_conic_rejected(self):
        with pytest.raises(ValueError):
            Conic(0, 0, 0, 0, 0, 0)

    def test_ellipse_angle_wrapped(self):
        e = Ellipse(0, 0, 2, 1, math.pi / 2)
        assert e.angle == pytest.approx(-math.pi / 2)
        assert -math.pi / 2 <= e.angle < math.pi / 2

    def test_ellipse_axis_order_enforced(self):
        with pytest.raises(ValueError):
            Ellipse(0, 0, 1, 2, 0)

    def test_wrap_axis_angle_range(self):
        for angle in np.linspace(-10, 10, 101):
            w = wrap_axis_angle(angle)
            assert -math.pi / 2 <= w < math.pi / 2
            assert angle_gap(w, angle) < 1e-12
