"""Median and mode polar parameterization of an ellipse cloud.

A closed contour is represented as per-ray radii about a fixed center at the
equally spaced angles theta_k = 2*pi*k/K. Each radius is a robust statistic
(median or KDE mode) of the radii where the outgoing ray crosses the cloud's
center-enclosing ellipses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import EllipseCloud, enclosing_mask, median_center, ray_radii_matrix
from .errors import EmptyIntersections, NoEnclosingEllipse

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class PolarContour:
    """Closed contour as radii at K equally spaced ray angles about a center."""

    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, float).reshape(2)
        self.radii = np.asarray(self.radii, float)
        if self.radii.ndim != 1 or self.radii.size < 8:
            raise ValueError("a polar contour needs at least 8 rays")
        if not np.all(np.isfinite(self.radii)) or np.any(self.radii <= 0.0):
            raise ValueError("radii must be finite and > 0")
        if not np.all(np.isfinite(self.center)):
            raise ValueError("center must be finite")

    @property
    def rays(self) -> int:
        return self.radii.size

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.rays) / self.rays

    def points(self) -> np.ndarray:
        """The (K, 2) polygon vertices on the contour."""
        th = self.angles
        return np.column_stack([
            self.center[0] + self.radii * np.cos(th),
            self.center[1] + self.radii * np.sin(th),
        ])

    def to_csv(self, include_center: bool = False) -> str:
        """CSV text ``theta,radius`` with LF endings.

        ``include_center`` prepends a ``# center,cx,cy`` comment so the
        contour can be positioned again when read back; the default output
        is the bare two-column table.
        """
        from .serialize import format_float

        lines = []
        if include_center:
            lines.append(f"# center,{format_float(self.center[0])},{format_float(self.center[1])}")
        lines.append("theta,radius")
        for th, r in zip(self.angles, self.radii):
            lines.append(f"{format_float(th)},{format_float(r)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, center=None) -> "PolarContour":
        """Parse contour CSV; the center comes from the ``# center`` comment
        when present, else from the ``center`` argument."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines and lines[0].startswith("# center,"):
            cells = lines[0].split(",")
            center = (float(cells[1]), float(cells[2]))
            lines = lines[1:]
        if center is None:
            raise ValueError("contour CSV carries no center; pass one explicitly")
        if not lines or lines[0] != "theta,radius":
            raise ValueError("contour CSV must have a 'theta,radius' header")
        radii = [float(ln.split(",")[1]) for ln in lines[1:]]
        return cls(np.asarray(center, float), np.array(radii, float))


@dataclass(frozen=True)
class KdeConfig:
    """Gaussian-KDE settings for mode extraction.

    ``bandwidth=None`` selects Silverman's rule per radius sample; an
    explicit bandwidth must be positive. ``grid_points`` controls the coarse
    scan that brackets the density peak before refinement.
    """

    bandwidth: float | None = None
    grid_points: int = 512

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be > 0")
        if self.grid_points < 256:
            raise ValueError("grid_points must be >= 256")


def median_radius(radii) -> float:
    """Median of intersection radii (middle-two mean for even counts)."""
    radii = np.asarray(radii, float)
    if radii.size == 0:
        raise EmptyIntersections("median of an empty radius list")
    return float(np.median(radii))


def silverman_bandwidth(sample: np.ndarray) -> float:
    """Rule-of-thumb Gaussian bandwidth, floored to keep the KDE usable."""
    sample = np.asarray(sample, float)
    n = sample.size
    sigma = float(np.std(sample))
    q75, q25 = np.percentile(sample, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sigma, iqr / 1.34) if iqr > 0.0 else sigma
    return max(0.9 * spread * n ** (-0.2), 1e-6)


def _gaussian_density(x, sample: np.ndarray, bandwidth: float) -> np.ndarray:
    z = (np.asarray(x, float)[..., None] - sample) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=-1)


def kde_mode(radii, cfg: KdeConfig = KdeConfig()) -> float:
    """Radius maximizing the Gaussian-kernel density estimate.

    A coarse grid over [min - 3*bw, max + 3*bw] locates the best cell
    (smallest radius on ties), then golden-section search refines the peak
    inside the bracket. When the sample range is so wide that the grid
    spacing exceeds half the bandwidth (heavy-tailed intersection radii do
    this), the scan also evaluates the densest sample values themselves, so
    a narrow dominant cluster cannot slip between grid points.
    """
    sample = np.asarray(radii, float)
    if sample.size == 0:
        raise EmptyIntersections("mode of an empty radius list")
    bw = cfg.bandwidth if cfg.bandwidth is not None else silverman_bandwidth(sample)

    lo = float(sample.min()) - 3.0 * bw
    hi = float(sample.max()) + 3.0 * bw
    spacing = (hi - lo) / (cfg.grid_points - 1)
    grid = np.linspace(lo, hi, cfg.grid_points)
    candidates = grid
    halfwidth = np.full(cfg.grid_points, spacing)

    if spacing > 0.5 * bw:
        ordered = np.sort(sample)
        counts = (np.searchsorted(ordered, ordered + bw, side="right")
                  - np.searchsorted(ordered, ordered - bw, side="left"))
        top = np.lexsort((ordered, -counts))[:64]
        candidates = np.concatenate([grid, ordered[top]])
        halfwidth = np.concatenate([halfwidth, np.full(top.size, bw)])

    density = _gaussian_density(candidates, sample, bw)
    # argmax with ties toward the smaller radius
    best = np.lexsort((candidates, -density))[0]
    a = max(candidates[best] - halfwidth[best], lo)
    b = min(candidates[best] + halfwidth[best], hi)
    refined = _golden_max(lambda x: _gaussian_density(x, sample, bw), a, b)
    if _gaussian_density(refined, sample, bw) >= density[best]:
        return refined
    return float(candidates[best])


def _golden_max(f, a: float, b: float, rel_tol: float = 1e-12) -> float:
    """Golden-section maximization on [a, b]."""
    if b <= a:
        return a
    tol = rel_tol * max(abs(a), abs(b), 1.0)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _enclosing_radii(cloud: EllipseCloud, rays: int) -> tuple[np.ndarray, np.ndarray]:
    """Median center plus the (K, M) ray-radius matrix of enclosing members."""
    center = median_center(cloud)
    params = cloud.params
    mask = enclosing_mask(params, center)
    if not np.any(mask):
        raise NoEnclosingEllipse(0.0)
    thetas = 2.0 * math.pi * np.arange(rays) / rays
    return center, ray_radii_matrix(params[mask], center, thetas)


def fit_median_contour(cloud: EllipseCloud, rays: int = 360) -> PolarContour:
    """Per-ray median of the enclosing ellipses' intersection radii.

    The contour center is the component-wise median of the cloud's ellipse
    centers; an ellipse that does not strictly enclose that center never
    contributes. Raises NoEnclosingEllipse when no member encloses it.
    """
    center, radii_matrix = _enclosing_radii(cloud, rays)
    return PolarContour(center, np.median(radii_matrix, axis=1))


def fit_mode_contour(cloud: EllipseCloud, rays: int = 360,
                     cfg: KdeConfig = KdeConfig()) -> PolarContour:
    """Per-ray KDE mode of the enclosing ellipses' intersection radii.

    Robust when the per-ray radius distribution turns multimodal, at the
    price of no continuity guarantee between adjacent rays.
    """
    center, radii_matrix = _enclosing_radii(cloud, rays)
    radii = np.array([kde_mode(row, cfg) for row in radii_matrix])
    return PolarContour(center, radii)


def contour_radius_at(c: PolarContour, theta) -> np.ndarray | float:
    """Radius at any angle via periodic linear interpolation between rays."""
    th = np.asarray(theta, float)
    scalar = th.ndim == 0
    pos = (th % (2.0 * math.pi)) * c.rays / (2.0 * math.pi)
    k0 = np.floor(pos).astype(int) % c.rays
    frac = pos - np.floor(pos)
    k1 = (k0 + 1) % c.rays
    vals = (1.0 - frac) * c.radii[k0] + frac * c.radii[k1]
    return float(vals) if scalar else vals


def ellipse_contour(e, rays: int = 360) -> PolarContour:
    """Polar contour of an ellipse about its own center."""
    th = 2.0 * math.pi * np.arange(rays) / rays
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    ux = ca * np.cos(th) + sa * np.sin(th)
    uy = -sa * np.cos(th) + ca * np.sin(th)
    r = 1.0 / np.sqrt((ux / e.major) ** 2 + (uy / e.minor) ** 2)
    return PolarContour(np.array([e.cx, e.cy]), r)


def star_contour(center, base_radius: float, amplitude: float, lobes: int,
                 rays: int = 360) -> PolarContour:
    """Star-shaped contour r(theta) = R * (1 + amplitude*cos(lobes*theta))."""
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must be in [0, 1)")
    th = 2.0 * math.pi * np.arange(rays) / rays
    r = base_radius * (1.0 + amplitude * np.cos(lobes * th))
    return PolarContour(np.asarray(center, float), r)
