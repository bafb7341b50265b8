"""Conic and ellipse primitives: exact five-point fits, conversions, rays.

Conventions: points are (x, y) pairs or (N, 2) float arrays; angles are in
radians; an ellipse's axis angle lives on the period-pi circle and is stored
in [-pi/2, pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQuintuple, NotAnEllipse

# Smallest/largest singular value of the 5x6 data matrix below this ratio
# means rank < 5 (no unique conic).
RANK_RTOL = 1e-10

# Conics whose minor axis collapses below this fraction of the major axis
# are rejected as degenerate.
MIN_AXIS_RATIO = 1e-9


def wrap_axis_angle(angle):
    """Wrap an axis angle (period pi) into [-pi/2, pi/2)."""
    return (angle + np.pi / 2.0) % np.pi - np.pi / 2.0


@dataclass(frozen=True)
class Conic:
    """General conic a*x^2 + b*x*y + c*y^2 + d*x + e*y + f = 0.

    Coefficients are rescaled on construction so that max |coefficient| = 1;
    the all-zero conic is rejected.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __post_init__(self):
        raw = np.array([self.a, self.b, self.c, self.d, self.e, self.f], float)
        if not np.all(np.isfinite(raw)):
            raise ValueError("conic coefficients must be finite")
        peak = np.max(np.abs(raw))
        if peak == 0.0:
            raise ValueError("all six conic coefficients are zero")
        scaled = raw / peak
        for name, value in zip("abcdef", scaled):
            object.__setattr__(self, name, float(value))

    def coeffs(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f], float)

    def evaluate(self, x, y):
        """Value of the conic polynomial at (x, y); vectorized."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return (self.a * x * x + self.b * x * y + self.c * y * y
                + self.d * x + self.e * y + self.f)


@dataclass(frozen=True)
class Ellipse:
    """Natural ellipse parameters: center, semi-axes, major-axis angle.

    ``major >= minor > 0``; ``angle`` is wrapped into [-pi/2, pi/2) on
    construction.
    """

    cx: float
    cy: float
    major: float
    minor: float
    angle: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.major, self.minor, self.angle)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("ellipse parameters must be finite")
        if not (self.major >= self.minor > 0.0):
            raise ValueError(f"need major >= minor > 0, got {self.major}, {self.minor}")
        object.__setattr__(self, "angle", float(wrap_axis_angle(self.angle)))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy], float)

    @property
    def area(self) -> float:
        return math.pi * self.major * self.minor

    def params(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.major, self.minor, self.angle], float)

    def boundary(self, t) -> np.ndarray:
        """Boundary points at parametric angles ``t``; returns (len(t), 2)."""
        t = np.atleast_1d(np.asarray(t, float))
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        px = self.major * np.cos(t)
        py = self.minor * np.sin(t)
        return np.column_stack([self.cx + ca * px - sa * py,
                                self.cy + sa * px + ca * py])


def ellipse_from_params(row) -> Ellipse:
    cx, cy, major, minor, angle = (float(v) for v in row)
    return Ellipse(cx, cy, major, minor, angle)


# ---------------------------------------------------------------------------
# Five-point conic fitting
# ---------------------------------------------------------------------------

def _design_matrix(xy: np.ndarray) -> np.ndarray:
    """Rows [x^2, xy, y^2, x, y, 1] for point arrays of shape (..., 2)."""
    x = xy[..., 0]
    y = xy[..., 1]
    return np.stack([x * x, x * y, y * y, x, y, np.ones_like(x)], axis=-1)


def fit_conics_batch(quintuples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fit one conic through each quintuple of points.

    Parameters
    ----------
    quintuples : (M, 5, 2) array
        Point quintuples. Each is translated to its centroid and scaled to
        RMS radius sqrt(2) before solving, which keeps the linear system
        well conditioned for raw pixel coordinates.

    Returns
    -------
    coeffs : (M, 6) array
        Conic coefficients in the original frame, rescaled per row so that
        max |coefficient| = 1. Rows flagged invalid are zero.
    ok : (M,) bool array
        False where the 5x6 data matrix is rank deficient (no unique conic).
    """
    q = np.asarray(quintuples, float)
    if q.ndim != 3 or q.shape[1:] != (5, 2):
        raise ValueError("expected quintuples of shape (M, 5, 2)")
    m = q.shape[0]
    if m == 0:
        return np.zeros((0, 6)), np.zeros(0, bool)

    centroid = q.mean(axis=1, keepdims=True)
    diff = q - centroid
    rms = np.sqrt(np.mean(np.sum(diff * diff, axis=2), axis=1))
    collapsed = rms == 0.0
    scale = np.where(collapsed, 1.0, rms / math.sqrt(2.0))
    local = diff / scale[:, None, None]

    design = _design_matrix(local)             # (M, 5, 6)
    _, sv, vt = np.linalg.svd(design)          # vt: (M, 6, 6)
    ok = (sv[:, 4] >= RANK_RTOL * sv[:, 0]) & ~collapsed
    v = vt[:, 5, :]                            # exact nullspace direction

    # Undo the conditioning transform x' = (x - mx)/s, y' = (y - my)/s.
    ap, bp, cp, dp, ep, fp = (v[:, k] for k in range(6))
    mx = centroid[:, 0, 0]
    my = centroid[:, 0, 1]
    s = scale
    s2 = s * s
    coeffs = np.empty((m, 6))
    coeffs[:, 0] = ap / s2
    coeffs[:, 1] = bp / s2
    coeffs[:, 2] = cp / s2
    coeffs[:, 3] = dp / s - (2.0 * ap * mx + bp * my) / s2
    coeffs[:, 4] = ep / s - (bp * mx + 2.0 * cp * my) / s2
    coeffs[:, 5] = (fp - (dp * mx + ep * my) / s
                    + (ap * mx * mx + bp * mx * my + cp * my * my) / s2)

    peak = np.max(np.abs(coeffs), axis=1)
    ok &= peak > 0.0
    safe = np.where(peak > 0.0, peak, 1.0)
    coeffs /= safe[:, None]
    coeffs[~ok] = 0.0
    return coeffs, ok


def fit_conic_five_points(points) -> Conic:
    """Fit the unique conic through five points.

    Raises
    ------
    DegenerateQuintuple
        If the five points admit no unique conic (collinear points,
        repeated points, or any other rank deficiency).
    """
    pts = np.asarray(points, float)
    if pts.shape != (5, 2):
        raise ValueError(f"expected five (x, y) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    coeffs, ok = fit_conics_batch(pts[None])
    if not ok[0]:
        raise DegenerateQuintuple("five-point data matrix has rank < 5")
    return Conic(*coeffs[0])


# ---------------------------------------------------------------------------
# Ellipse discrimination and conversion
# ---------------------------------------------------------------------------

def ellipse_mask(coeffs: np.ndarray) -> np.ndarray:
    """Vectorized real-ellipse test on conic coefficient rows (..., 6)."""
    a, b, c, d, e, f = (coeffs[..., k] for k in range(6))
    disc = b * b - 4.0 * a * c
    cond = c * ((a * c - b * b / 4.0) * f
                + b * e * d / 4.0
                - c * d * d / 4.0
                - a * e * e / 4.0)
    return (disc < 0.0) & (cond < 0.0)


def is_ellipse(conic: Conic) -> bool:
    """True iff the conic is a real, non-degenerate ellipse (or circle)."""
    return bool(ellipse_mask(conic.coeffs()[None])[0])


def conics_to_ellipses(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Convert conic coefficient rows to natural-parameter rows.

    Returns
    -------
    params : (M, 5) array
        Rows (cx, cy, major, minor, angle); invalid rows are zero.
    ok : (M,) bool array
        False where the conic is not a usable ellipse (fails the ellipse
        conditions, or minor < MIN_AXIS_RATIO * major).
    """
    coeffs = np.asarray(coeffs, float)
    a, b, c, d, e, f = (coeffs[:, k] for k in range(6))
    ok = ellipse_mask(coeffs)

    det = 4.0 * a * c - b * b                   # > 0 on ellipse rows
    safe_det = np.where(det != 0.0, det, 1.0)
    cx = (b * e - 2.0 * c * d) / safe_det
    cy = (b * d - 2.0 * a * e) / safe_det
    f0 = (a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f)

    # Eigen-decomposition of [[a, b/2], [b/2, c]] in closed form.
    q = b / 2.0
    half_sum = (a + c) / 2.0
    half_diff = (a - c) / 2.0
    root = np.hypot(half_diff, q)
    lam1 = half_sum - root
    lam2 = half_sum + root

    with np.errstate(divide="ignore", invalid="ignore"):
        r1sq = -f0 / lam1
        r2sq = -f0 / lam2
    ok &= np.isfinite(r1sq) & np.isfinite(r2sq) & (r1sq > 0.0) & (r2sq > 0.0)
    r1sq = np.where(ok, r1sq, 1.0)
    r2sq = np.where(ok, r2sq, 1.0)

    r1 = np.sqrt(r1sq)
    r2 = np.sqrt(r2sq)
    major = np.maximum(r1, r2)
    minor = np.minimum(r1, r2)
    lam_major = np.where(r1 >= r2, lam1, lam2)

    # Eigenvector for lam_major, taking the better-conditioned expression.
    v1x, v1y = q, lam_major - a
    v2x, v2y = lam_major - c, q
    use_first = np.hypot(v1x, v1y) >= np.hypot(v2x, v2y)
    vx = np.where(use_first, v1x, v2x)
    vy = np.where(use_first, v1y, v2y)
    degenerate_vec = (vx == 0.0) & (vy == 0.0)   # perfect circle
    angle = np.where(degenerate_vec, 0.0, np.arctan2(vy, vx))
    angle = wrap_axis_angle(angle)
    angle = np.where(minor >= major * (1.0 - 1e-12), 0.0, angle)

    ok &= minor >= MIN_AXIS_RATIO * major
    params = np.column_stack([cx, cy, major, minor, angle])
    params[~ok] = 0.0
    return params, ok


def conic_to_ellipse(conic: Conic) -> Ellipse:
    """Natural parameters of an ellipse conic.

    Raises
    ------
    NotAnEllipse
        If the conic fails the ellipse conditions or its minor axis is
        numerically collapsed.
    """
    params, ok = conics_to_ellipses(conic.coeffs()[None])
    if not ok[0]:
        raise NotAnEllipse("conic does not describe a usable real ellipse")
    return ellipse_from_params(params[0])


def ellipse_to_conic(e: Ellipse) -> Conic:
    """Implicit-conic coefficients of an ellipse (normalized)."""
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    ia2 = 1.0 / (e.major * e.major)
    ib2 = 1.0 / (e.minor * e.minor)
    a = ca * ca * ia2 + sa * sa * ib2
    b = 2.0 * ca * sa * (ia2 - ib2)
    c = sa * sa * ia2 + ca * ca * ib2
    d = -2.0 * a * e.cx - b * e.cy
    ee = -b * e.cx - 2.0 * c * e.cy
    f = a * e.cx * e.cx + b * e.cx * e.cy + c * e.cy * e.cy - 1.0
    return Conic(a, b, c, d, ee, f)


# ---------------------------------------------------------------------------
# Ray casting and point location
# ---------------------------------------------------------------------------

def _to_frame(e: Ellipse, pts: np.ndarray) -> np.ndarray:
    """Map plane points into the ellipse's axis-aligned frame."""
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    dx = pts[..., 0] - e.cx
    dy = pts[..., 1] - e.cy
    return np.stack([ca * dx + sa * dy, -sa * dx + ca * dy], axis=-1)


def ray_intersect(e: Ellipse, origin, theta: float) -> np.ndarray:
    """Radii r >= 0 where origin + r*(cos theta, sin theta) meets the boundary.

    Returns an ascending array; empty when the ray misses the ellipse.
    A tangency yields a single radius.
    """
    o = _to_frame(e, np.asarray(origin, float))
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    ux, uy = math.cos(theta), math.sin(theta)
    ux, uy = ca * ux + sa * uy, -sa * ux + ca * uy

    ia2 = 1.0 / (e.major * e.major)
    ib2 = 1.0 / (e.minor * e.minor)
    alpha = ux * ux * ia2 + uy * uy * ib2
    beta = 2.0 * (o[0] * ux * ia2 + o[1] * uy * ib2)
    gamma = o[0] * o[0] * ia2 + o[1] * o[1] * ib2 - 1.0

    disc = beta * beta - 4.0 * alpha * gamma
    if disc < 0.0:
        return np.empty(0)
    sq = math.sqrt(disc)
    roots = np.array([(-beta - sq) / (2.0 * alpha), (-beta + sq) / (2.0 * alpha)])
    tol = 1e-12 * max(1.0, e.major)
    roots = roots[roots >= -tol]
    roots = np.clip(roots, 0.0, None)
    roots.sort()
    if roots.size == 2 and roots[1] - roots[0] <= tol:
        roots = roots[:1]
    return roots


def contains_point(e: Ellipse, p) -> bool:
    """True iff p lies strictly inside the ellipse boundary."""
    fx, fy = _to_frame(e, np.asarray(p, float))
    return bool((fx / e.major) ** 2 + (fy / e.minor) ** 2 < 1.0)
