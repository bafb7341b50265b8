"""Synthetic noisy-ellipse datasets and the error metrics used to compare fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cloud import PointSet
from .contour import PolarContour, contour_radius_at
from .errors import SpecInvalid
from .fitters import ellipse_distances
from .geometry import Ellipse, ray_intersect


@dataclass(frozen=True)
class SynthSpec:
    """One synthetic dataset: a truth ellipse plus noise/outlier/occlusion knobs.

    ``n_points`` is the total count; round(n_points * outlier_ratio) points
    come from ``outlier_ellipse`` and the rest from ``truth``. Inlier
    parameter angles avoid one contiguous arc covering ``occlusion_ratio``
    of the circle, placed at a seeded random start.
    """

    truth: Ellipse
    n_points: int
    noise_sigma: float = 0.0
    outlier_ratio: float = 0.0
    outlier_ellipse: Ellipse | None = None
    occlusion_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise SpecInvalid(f"outlier_ratio must be in [0, 1), got {self.outlier_ratio}")
        if not 0.0 <= self.occlusion_ratio < 1.0:
            raise SpecInvalid(f"occlusion_ratio must be in [0, 1), got {self.occlusion_ratio}")
        if self.noise_sigma < 0.0:
            raise SpecInvalid("noise_sigma must be >= 0")
        if self.outlier_ratio > 0.0 and self.outlier_ellipse is None:
            raise SpecInvalid("outlier_ratio > 0 requires an outlier_ellipse")
        if self.n_inliers < 5:
            raise SpecInvalid(f"need >= 5 inliers after outlier split, got {self.n_inliers}")

    @property
    def n_outliers(self) -> int:
        return int(round(self.n_points * self.outlier_ratio))

    @property
    def n_inliers(self) -> int:
        return self.n_points - self.n_outliers


def generate(spec: SynthSpec) -> PointSet:
    """Draw the labeled point set for a spec; deterministic given its seed.

    Draw order is fixed (arc start, inlier angles, inlier noise, outlier
    angles, outlier noise) so identical specs give identical point sets.
    """
    rng = np.random.default_rng(spec.seed)
    arc_start = rng.uniform(0.0, 2.0 * math.pi)
    gap = 2.0 * math.pi * spec.occlusion_ratio

    u = rng.random(spec.n_inliers)
    t_in = (arc_start + gap + u * (2.0 * math.pi - gap)) % (2.0 * math.pi)
    inliers = spec.truth.boundary(t_in)
    inliers += rng.normal(0.0, spec.noise_sigma, inliers.shape) if spec.noise_sigma else 0.0

    if spec.n_outliers:
        t_out = rng.uniform(0.0, 2.0 * math.pi, spec.n_outliers)
        outliers = spec.outlier_ellipse.boundary(t_out)
        if spec.noise_sigma:
            outliers += rng.normal(0.0, spec.noise_sigma, outliers.shape)
        points = np.vstack([inliers, outliers])
    else:
        points = inliers

    labels = ["inlier"] * spec.n_inliers + ["outlier"] * spec.n_outliers
    return PointSet(points, labels)


@dataclass(frozen=True)
class FitError:
    """Mean distance from evaluation points on a fit to the truth ellipse."""

    mean_distance: float
    algorithm: str = ""
    run_index: int = 0

    def with_context(self, algorithm: str, run_index: int) -> "FitError":
        return replace(self, algorithm=algorithm, run_index=run_index)


def curve_error(fit, truth: Ellipse, n_eval: int = 200) -> FitError:
    """Average orthogonal distance from ``n_eval`` points on the fit to truth.

    Ellipse fits are sampled uniformly in parametric angle, polar contours
    uniformly in ray angle.
    """
    if isinstance(fit, PolarContour):
        theta = np.linspace(0.0, 2.0 * math.pi, n_eval, endpoint=False)
        r = contour_radius_at(fit, theta)
        pts = np.column_stack([fit.center[0] + r * np.cos(theta),
                               fit.center[1] + r * np.sin(theta)])
    elif isinstance(fit, Ellipse):
        t = np.linspace(0.0, 2.0 * math.pi, n_eval, endpoint=False)
        pts = fit.boundary(t)
    else:
        raise TypeError(f"cannot evaluate a fit of type {type(fit).__name__}")
    return FitError(mean_distance=float(np.mean(ellipse_distances(truth, pts))))


def contour_area(c: PolarContour) -> float:
    """Shoelace area of the polygon through the contour's ray points."""
    r = c.radii
    r_next = np.roll(r, -1)
    return float(0.5 * np.sum(r * r_next) * math.sin(2.0 * math.pi / c.rays))


def _radius_about(fit, center, thetas: np.ndarray) -> np.ndarray:
    """Outgoing-ray radii of a fit (contour or ellipse) about an external center."""
    if isinstance(fit, Ellipse):
        out = np.empty(len(thetas))
        for k, th in enumerate(thetas):
            hits = ray_intersect(fit, center, th)
            out[k] = hits[-1] if hits.size else 0.0
        return out

    same_center = np.allclose(fit.center, center, atol=1e-12)
    if same_center and len(thetas) == fit.rays:
        return fit.radii.copy()

    # ray/segment intersections against the contour polygon, keeping the
    # outermost crossing per ray
    poly = fit.points()
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = np.zeros(len(thetas))
    cx, cy = float(center[0]), float(center[1])
    for k, th in enumerate(thetas):
        ux, uy = math.cos(th), math.sin(th)
        # solve center + r*u = a + s*(b-a) for each segment
        ex = b[:, 0] - a[:, 0]
        ey = b[:, 1] - a[:, 1]
        den = ux * ey - uy * ex
        ok = np.abs(den) > 1e-15
        ax = a[:, 0] - cx
        ay = a[:, 1] - cy
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (uy * ax - ux * ay) / den
            r = np.where(np.abs(ux) > np.abs(uy),
                         (ax + s * ex) / ux, (ay + s * ey) / uy)
        hit = ok & (s >= 0.0) & (s < 1.0) & (r >= 0.0)
        if np.any(hit):
            out[k] = float(np.max(r[hit]))
    return out


def edge_deviation(fit, truth_contour: PolarContour) -> float:
    """Mean |r_fit - r_truth| per ray, measured about the truth's center.

    The fit may be a PolarContour (resampled onto the truth's rays when
    needed) or an Ellipse; rays where the fit has no outgoing crossing
    contribute the full truth radius.
    """
    thetas = truth_contour.angles
    r_fit = _radius_about(fit, truth_contour.center, thetas)
    return float(np.mean(np.abs(r_fit - truth_contour.radii)))
