"""Baseline robust ellipse fitters sharing one sampled ellipse cloud.

All four fitters consume the same inputs the contour parameterizations use:
a point set and/or a cloud of five-point ellipse fits. The orthogonal
point-to-ellipse distance underlies both the least-squares fitter and every
error metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import EllipseCloud, PointSet
from .errors import EmptyCloud, EmptyInput, NoInliers, NotAnEllipse, TooFewPoints
from .geometry import Ellipse, wrap_axis_angle

# Point-pair budget per chunk when evaluating a cloud's distance matrix.
_DIST_CHUNK_CELLS = 2_000_000


# ---------------------------------------------------------------------------
# Orthogonal point-to-ellipse distance
# ---------------------------------------------------------------------------

def _quadrant_distance(a, b, x, y):
    """Distance from first-quadrant points (x, y) to the axis-aligned ellipse
    (x/a)^2 + (y/b)^2 = 1 with a >= b. Fully vectorized; accurate to ~1e-12.

    Uses bisection + Newton polish on the root of
    F(s) = (a*x/(s+a^2))^2 + (b*y/(s+b^2))^2 - 1, which is strictly
    decreasing in s, with closed forms for the degenerate y = 0 strip and
    for circles.
    """
    a, b, x, y = np.broadcast_arrays(*(np.asarray(v, float) for v in (a, b, x, y)))
    out = np.empty(a.shape)

    circle = (a - b) <= 1e-14 * a
    if np.any(circle):
        out[circle] = np.abs(np.hypot(x[circle], y[circle]) - a[circle])

    gen = ~circle
    y0 = gen & (y == 0.0)
    if np.any(y0):
        aa, bb, xx = a[y0], b[y0], x[y0]
        split = (aa * aa - bb * bb) / aa
        inner = xx < split
        cos_t = np.where(inner, aa * xx / (aa * aa - bb * bb), 1.0)
        fx = aa * cos_t
        fy = bb * np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, None))
        d_inner = np.hypot(fx - xx, fy)
        out[y0] = np.where(inner, d_inner, np.abs(xx - aa))

    rest = gen & (y > 0.0)
    if np.any(rest):
        aa, bb, xx, yy = a[rest], b[rest], x[rest], y[rest]
        ax = aa * xx
        by = bb * yy
        s_lo = -bb * bb + by                       # F(s_lo) >= 0
        s_hi = -bb * bb + np.hypot(ax, by)         # F(s_hi) <= 0
        for _ in range(52):
            s_mid = 0.5 * (s_lo + s_hi)
            f = (ax / (s_mid + aa * aa)) ** 2 + (by / (s_mid + bb * bb)) ** 2 - 1.0
            s_lo = np.where(f > 0.0, s_mid, s_lo)
            s_hi = np.where(f > 0.0, s_hi, s_mid)
        s = 0.5 * (s_lo + s_hi)
        for _ in range(3):                          # Newton polish
            ta = s + aa * aa
            tb = s + bb * bb
            f = (ax / ta) ** 2 + (by / tb) ** 2 - 1.0
            fp = -2.0 * ((ax * ax) / ta ** 3 + (by * by) / tb ** 3)
            s = s - np.where(fp != 0.0, f / fp, 0.0)
            s = np.maximum(s, -bb * bb * (1.0 - 1e-15))
        fx = aa * aa * xx / (s + aa * aa)
        fy = bb * bb * yy / (s + bb * bb)
        out[rest] = np.hypot(fx - xx, fy - yy)

    return out


def ellipse_distances(e: Ellipse, points, signed: bool = False) -> np.ndarray:
    """Orthogonal distances from points to the ellipse boundary.

    With ``signed=True`` interior points get negative sign (useful as smooth
    least-squares residuals).
    """
    pts = np.atleast_2d(np.asarray(points, float))
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    dx = pts[:, 0] - e.cx
    dy = pts[:, 1] - e.cy
    fx = np.abs(ca * dx + sa * dy)
    fy = np.abs(-sa * dx + ca * dy)
    d = _quadrant_distance(e.major, e.minor, fx, fy)
    if signed:
        inside = (fx / e.major) ** 2 + (fy / e.minor) ** 2 < 1.0
        d = np.where(inside, -d, d)
    return d


def point_ellipse_distance(e: Ellipse, p) -> float:
    """Shortest distance from one point to the ellipse boundary."""
    return float(ellipse_distances(e, np.asarray(p, float)[None])[0])


def distance_matrix(params: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(M, N) orthogonal distances from N points to M ellipse-parameter rows."""
    pts = np.asarray(points, float)
    m = len(params)
    n = len(pts)
    out = np.empty((m, n))
    rows = max(1, _DIST_CHUNK_CELLS // max(n, 1))
    for start in range(0, m, rows):
        chunk = params[start:start + rows]
        cx, cy, major, minor, angle = (chunk[:, k][:, None] for k in range(5))
        ca, sa = np.cos(angle), np.sin(angle)
        dx = pts[None, :, 0] - cx
        dy = pts[None, :, 1] - cy
        fx = np.abs(ca * dx + sa * dy)
        fy = np.abs(-sa * dx + ca * dy)
        out[start:start + rows] = _quadrant_distance(major, minor, fx, fy)
    return out


# ---------------------------------------------------------------------------
# Orthogonal least squares (damped Gauss-Newton)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsFit:
    """Result of the orthogonal-distance fit; check ``converged``."""

    ellipse: Ellipse
    converged: bool
    iterations: int
    rms_distance: float


def _canonical_params(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    if u[3] > u[2]:
        u[2], u[3] = u[3], u[2]
        u[4] += math.pi / 2.0
    u[4] = wrap_axis_angle(u[4])
    return u


def _signed_residuals(u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    # the residual depends only on the geometric ellipse, so canonicalizing
    # here keeps finite-difference probes valid near major == minor
    u = _canonical_params(u)
    e = Ellipse(u[0], u[1], u[2], u[3], u[4])
    return ellipse_distances(e, pts, signed=True)


def fit_ols(points, init: Ellipse, max_iter: int = 200,
            step_tol: float = 1e-9) -> OlsFit:
    """Minimize the summed squared orthogonal distances from points.

    Damped Gauss-Newton with a numerical Jacobian: a step is only accepted
    when it does not increase the objective, so the objective is monotone
    over accepted iterations. Convergence means the parameter step dropped
    below ``step_tol``; otherwise the best iterate is returned flagged
    ``converged=False``.

    Raises
    ------
    TooFewPoints
        Fewer than 6 points.
    NotAnEllipse
        If the iterate's minor axis collapses toward zero.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    if len(pts) < 6:
        raise TooFewPoints(f"orthogonal fit needs >= 6 points, got {len(pts)}")

    u = _canonical_params(init.params())
    r = _signed_residuals(u, pts)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        scale = max(u[2], 1e-6)
        deltas = np.array([1e-7 * scale, 1e-7 * scale, 1e-7 * scale, 1e-7 * scale, 1e-8])
        jac = np.empty((len(pts), 5))
        for k in range(5):
            probe = u.copy()
            probe[k] += deltas[k]
            if probe[3] <= 0.0:
                probe[k] -= 2.0 * deltas[k]
                deltas[k] = -deltas[k]
            jac[:, k] = (_signed_residuals(probe, pts) - r) / deltas[k]

        grad = jac.T @ r
        hess = jac.T @ jac
        step = None
        while lam < 1e14:
            damped = hess + lam * np.diag(np.diag(hess)) + 1e-12 * np.eye(5)
            try:
                cand_step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = u + cand_step
            if cand[2] <= 0.0 or cand[3] <= 0.0:
                lam *= 10.0
                continue
            cand = _canonical_params(cand)
            r_cand = _signed_residuals(cand, pts)
            cost_cand = float(r_cand @ r_cand)
            if cost_cand <= cost:
                step = cand_step
                u, r, cost = cand, r_cand, cost_cand
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 10.0
        if step is None:
            break  # no descending step exists at any damping: stationary
        if float(np.linalg.norm(step)) < step_tol:
            converged = True
            break

    if u[3] < 1e-6 * u[2]:
        raise NotAnEllipse("orthogonal fit collapsed to a degenerate ellipse")
    ellipse = Ellipse(u[0], u[1], u[2], u[3], u[4])
    rms = math.sqrt(cost / len(pts))
    return OlsFit(ellipse=ellipse, converged=converged or step is None,
                  iterations=iterations, rms_distance=rms)


# ---------------------------------------------------------------------------
# RANSAC
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RansacConfig:
    """Inlier threshold on the orthogonal distance, in data units."""

    inlier_threshold: float

    def __post_init__(self):
        if not self.inlier_threshold > 0.0:
            raise ValueError("inlier_threshold must be > 0")


def auto_inlier_threshold(ps: PointSet, cloud: EllipseCloud) -> float:
    """Default threshold: twice the MAD-estimated noise sigma.

    Sigma comes from 1.4826 * MAD of point distances to the Rosin-median
    ellipse; the result is floored so exact-on-curve data still counts
    inliers.
    """
    rosin = fit_rosin_median(cloud)
    d = ellipse_distances(rosin, ps.points)
    sigma = 1.4826 * float(np.median(np.abs(d - np.median(d))))
    return max(2.0 * sigma, 1e-9 * rosin.major, 1e-12)


def fit_ransac(ps: PointSet, cloud: EllipseCloud, cfg: RansacConfig) -> Ellipse:
    """Pick the cloud member with the most inliers, then refit to them.

    Ties on the inlier count go to the candidate with the smaller summed
    inlier distance. The refit is an orthogonal least-squares fit seeded
    with the winner; if the refit would lose inliers against the winner, the
    winner is returned unchanged.
    """
    if len(cloud) == 0:
        raise EmptyCloud("RANSAC needs a non-empty ellipse cloud")
    pts = ps.points
    dists = distance_matrix(cloud.params, pts)
    inlier = dists < cfg.inlier_threshold
    counts = inlier.sum(axis=1)
    best_count = int(counts.max())
    if best_count == 0:
        raise NoInliers(f"no cloud member has inliers at threshold {cfg.inlier_threshold:.6g}")

    tied = np.flatnonzero(counts == best_count)
    sums = (dists[tied] * inlier[tied]).sum(axis=1)
    winner_idx = int(tied[np.argmin(sums)])
    winner = cloud.ellipses[winner_idx]
    support = pts[inlier[winner_idx]]
    if len(support) < 6:
        return winner

    try:
        refined = fit_ols(support, init=winner).ellipse
    except NotAnEllipse:
        return winner
    refined_count = int((ellipse_distances(refined, pts) < cfg.inlier_threshold).sum())
    return refined if refined_count >= best_count else winner


# ---------------------------------------------------------------------------
# Randomized Hough transform (KDE accumulator over natural parameters)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RhtConfig:
    """Scalar bandwidth multiplier for the 5-D natural-parameter KDE.

    Each dimension's kernel width is ``bandwidth`` times that dimension's
    median absolute deviation, which keeps lengths and angles commensurable.
    """

    bandwidth: float = 1.0

    def __post_init__(self):
        if not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be > 0")


def _wrap_half_period(values: np.ndarray, period: float) -> np.ndarray:
    return (values + period / 2.0) % period - period / 2.0


def fit_rht(cloud: EllipseCloud, cfg: RhtConfig = RhtConfig()) -> Ellipse:
    """Most popular ellipse in natural-parameter space.

    The directional median of the axis angles is subtracted first so the
    angle dimension is centered about zero, the product-Gaussian KDE is
    evaluated at every member, and the members within one bandwidth (per
    dimension) of the argmax are averaged.
    """
    if len(cloud) == 0:
        raise EmptyCloud("RHT needs a non-empty ellipse cloud")
    params = cloud.params
    med_angle = circular_median(params[:, 4], math.pi)
    x = params.copy()
    x[:, 4] = _wrap_half_period(params[:, 4] - med_angle, math.pi)

    bw = np.empty(5)
    for k in range(5):
        col = x[:, k]
        dev = np.abs(col - np.median(col))
        if k == 4:
            dev = np.minimum(dev, math.pi - dev)
        mad = float(np.median(dev))
        bw[k] = cfg.bandwidth * mad
    bw = np.maximum(bw, np.maximum(1e-9 * np.abs(x).max(axis=0), 1e-12))

    m = len(x)
    density = np.empty(m)
    rows = max(1, _DIST_CHUNK_CELLS // m)
    for start in range(0, m, rows):
        sq = np.zeros((len(x[start:start + rows]), m))
        for k in range(5):
            diff = x[start:start + rows, k][:, None] - x[None, :, k]
            if k == 4:
                diff = _wrap_half_period(diff, math.pi)
            sq += (diff / bw[k]) ** 2
        density[start:start + rows] = np.exp(-0.5 * sq).sum(axis=1)

    mode_idx = int(np.argmax(density))
    diff = np.abs(x - x[mode_idx])
    diff[:, 4] = np.abs(_wrap_half_period(x[:, 4] - x[mode_idx, 4], math.pi))
    members = np.all(diff <= bw, axis=1)
    cluster = x[members]

    mean = cluster.mean(axis=0)
    rel = _wrap_half_period(cluster[:, 4] - x[mode_idx, 4], math.pi)
    mean_angle = x[mode_idx, 4] + rel.mean()
    return Ellipse(mean[0], mean[1], mean[2], mean[3],
                   wrap_axis_angle(mean_angle + med_angle))


# ---------------------------------------------------------------------------
# Rosin median ellipse
# ---------------------------------------------------------------------------

def fit_rosin_median(cloud: EllipseCloud) -> Ellipse:
    """Component-wise median of the natural parameters.

    The four linear parameters take the ordinary median (middle-two mean for
    even counts); the axis angle takes the directional median on its
    period-pi circle.
    """
    if len(cloud) == 0:
        raise EmptyCloud("Rosin median needs a non-empty ellipse cloud")
    params = cloud.params
    cx, cy, major, minor = np.median(params[:, :4], axis=0)
    angle = circular_median(params[:, 4], math.pi)
    return Ellipse(cx, cy, major, minor, angle)


# ---------------------------------------------------------------------------
# Directional median
# ---------------------------------------------------------------------------

def circular_median(angles, period: float) -> float:
    """Sample angle minimizing the summed wrapped absolute deviations.

    The wrap distance between two angles is min(|d| mod period,
    period - |d| mod period). Ties go to the smallest canonical angle; the
    result is canonicalized to [-period/2, period/2).
    """
    ang = np.asarray(angles, float).ravel()
    if ang.size == 0:
        raise EmptyInput("directional median of an empty sample")
    if not period > 0.0:
        raise ValueError("period must be > 0")

    rep = ang % period
    n = rep.size
    sums = np.empty(n)
    rows = max(1, _DIST_CHUNK_CELLS // n)
    for start in range(0, n, rows):
        d = np.abs(rep[start:start + rows, None] - rep[None, :])
        np.minimum(d, period - d, out=d)
        sums[start:start + rows] = d.sum(axis=1)

    # deviation sums can tie exactly in real arithmetic but differ by a few
    # ulp in floats; a tiny band keeps the smallest-canonical tie rule stable
    low = float(sums.min())
    best = np.flatnonzero(sums <= low + 1e-12 * max(1.0, low))
    canonical = _wrap_half_period(rep[best], period)
    return float(canonical.min())
