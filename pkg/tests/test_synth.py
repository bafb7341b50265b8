import math

import numpy as np
import pytest

from contourfit.contour import PolarContour, ellipse_contour, star_contour
from contourfit.errors import SpecInvalid
from contourfit.geometry import Ellipse, ellipse_to_conic
from contourfit.synth import (
    FitError,
    SynthSpec,
    contour_area,
    curve_error,
    edge_deviation,
    generate,
)

TRUTH = Ellipse(0.0, 0.0, 100.0, 60.0, 0.3)
OUTLIER = Ellipse(60.0, 40.0, 80.0, 50.0, -0.5)


class TestGenerate:
    def test_exact_points_without_noise(self):
        ps = generate(SynthSpec(truth=TRUTH, n_points=50, seed=1))
        conic = ellipse_to_conic(TRUTH)
        residual = conic.evaluate(ps.points[:, 0], ps.points[:, 1])
        assert np.max(np.abs(residual)) < 1e-9
        assert ps.labels == ["inlier"] * 50

    def test_label_counts_for_section3_geometry(self):
        spec = SynthSpec(truth=TRUTH, n_points=600, outlier_ratio=1 / 6,
                         outlier_ellipse=OUTLIER, seed=2)
        ps = generate(spec)
        assert ps.labels.count("inlier") == 500
        assert ps.labels.count("outlier") == 100

    def test_occlusion_arc_avoided(self):
        spec = SynthSpec(truth=TRUTH, n_points=400, occlusion_ratio=0.4, seed=3)
        ps = generate(spec)
        rng = np.random.default_rng(3)
        arc_start = rng.uniform(0, 2 * math.pi)
        gap = 2 * math.pi * 0.4

        # recover each inlier's parameter angle from its exact position
        local = ps.points - [TRUTH.cx, TRUTH.cy]
        ca, sa = math.cos(TRUTH.angle), math.sin(TRUTH.angle)
        fx = ca * local[:, 0] + sa * local[:, 1]
        fy = -sa * local[:, 0] + ca * local[:, 1]
        t = np.arctan2(fy / TRUTH.minor, fx / TRUTH.major) % (2 * math.pi)
        offset = (t - arc_start) % (2 * math.pi)
        assert np.all(offset >= gap - 1e-9)

    def test_deterministic(self):
        spec = SynthSpec(truth=TRUTH, n_points=100, noise_sigma=2.0,
                         outlier_ratio=0.25, outlier_ellipse=OUTLIER,
                         occlusion_ratio=0.1, seed=9)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.labels == b.labels

    def test_invalid_ratio(self):
        with pytest.raises(SpecInvalid):
            SynthSpec(truth=TRUTH, n_points=100, occlusion_ratio=1.0)

    def test_outlier_ratio_without_ellipse(self):
        with pytest.raises(SpecInvalid):
            SynthSpec(truth=TRUTH, n_points=100, outlier_ratio=0.2)

    def test_too_few_inliers(self):
        with pytest.raises(SpecInvalid):
            SynthSpec(truth=TRUTH, n_points=5, outlier_ratio=0.4,
                      outlier_ellipse=OUTLIER)


class TestCurveError:
    def test_truth_fit_zero(self):
        assert curve_error(TRUTH, TRUTH).mean_distance == pytest.approx(0.0, abs=1e-9)

    def test_concentric_circles(self):
        fit = Ellipse(0, 0, 2, 2, 0)
        truth = Ellipse(0, 0, 1, 1, 0)
        assert curve_error(fit, truth).mean_distance == pytest.approx(1.0, abs=1e-9)

    def test_constant_contour_about_circle(self):
        c = PolarContour([0, 0], np.full(360, 1.5))
        truth = Ellipse(0, 0, 1, 1, 0)
        assert curve_error(c, truth).mean_distance == pytest.approx(0.5, abs=1e-9)

    def test_rigid_invariance(self):
        fit = Ellipse(0.5, -0.25, 2.0, 1.0, 0.2)
        truth = Ellipse(0.0, 0.0, 2.0, 1.1, 0.25)
        base = curve_error(fit, truth).mean_distance
        phi, tx, ty = 0.8, 5.0, -3.0
        c, s = math.cos(phi), math.sin(phi)

        def moved(e):
            return Ellipse(c * e.cx - s * e.cy + tx, s * e.cx + c * e.cy + ty,
                           e.major, e.minor, e.angle + phi)

        assert curve_error(moved(fit), moved(truth)).mean_distance == pytest.approx(
            base, abs=1e-9)

    def test_context_fields(self):
        err = FitError(1.25).with_context("ransac", 3)
        assert err.algorithm == "ransac"
        assert err.run_index == 3
        assert err.mean_distance == 1.25


class TestContourArea:
    def test_unit_circle(self):
        c = PolarContour([0, 0], np.ones(360))
        assert contour_area(c) == pytest.approx(math.pi, rel=1e-3)

    def test_quadratic_scaling(self):
        base = PolarContour([0, 0], np.ones(360))
        scaled = PolarContour([0, 0], np.full(360, 3.0))
        assert contour_area(scaled) == pytest.approx(9.0 * contour_area(base), rel=1e-12)

    def test_ellipse_area(self):
        c = ellipse_contour(Ellipse(0, 0, 2, 1, 0), rays=360)
        assert contour_area(c) == pytest.approx(2 * math.pi, rel=2e-3)

    def test_second_order_convergence(self):
        # Richardson check on a circle: error drops ~4x from K=180 to K=360
        e180 = abs(contour_area(PolarContour([0, 0], np.ones(180))) - math.pi)
        e360 = abs(contour_area(PolarContour([0, 0], np.ones(360))) - math.pi)
        assert e360 == pytest.approx(e180 / 4.0, rel=0.05)


class TestEdgeDeviation:
    def test_identical_contours(self):
        c = star_contour((1, 2), 10.0, 0.15, 6, rays=180)
        assert edge_deviation(c, c) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_offset(self):
        truth = PolarContour([0, 0], np.full(90, 5.0))
        fit = PolarContour([0, 0], np.full(90, 6.0))
        assert edge_deviation(fit, truth) == pytest.approx(1.0, abs=1e-12)

    def test_half_rays_offset(self):
        radii = np.full(90, 5.0)
        radii[:45] += 2.0
        fit = PolarContour([0, 0], radii)
        truth = PolarContour([0, 0], np.full(90, 5.0))
        assert edge_deviation(fit, truth) == pytest.approx(1.0, abs=1e-12)

    def test_ellipse_fit_about_truth_center(self):
        truth = ellipse_contour(Ellipse(0, 0, 4, 4, 0), rays=120)
        fit = Ellipse(0, 0, 5, 5, 0)
        assert edge_deviation(fit, truth) == pytest.approx(1.0, abs=1e-9)

    def test_offset_contour_resampled(self):
        # fit is the same circle described about a shifted center
        truth = ellipse_contour(Ellipse(0, 0, 5, 5, 0), rays=180)
        shifted_center = np.array([0.5, 0.0])
        th = 2 * math.pi * np.arange(180) / 180
        # radii of the unit-centered circle about (0.5, 0): solve quadratic
        radii = np.empty(180)
        for k, t in enumerate(th):
            ux, uy = math.cos(t), math.sin(t)
            b = 2 * (0.5 * ux)
            c = 0.25 - 25.0
            radii[k] = (-b + math.sqrt(b * b - 4 * c)) / 2
        fit = PolarContour(shifted_center, radii)
        assert edge_deviation(fit, truth) < 2e-3  # polygon chord error only
