"""Random five-point subsets, conic fitting, and the shared ellipse cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, TooFewPoints
from .geometry import Ellipse, conics_to_ellipses, ellipse_from_params, fit_conics_batch

# Cap on the scratch matrix used to draw quintuple indices in one shot.
_SAMPLE_CHUNK_CELLS = 20_000_000


@dataclass
class PointSet:
    """An ordered set of plane points with optional provenance labels."""

    points: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be (N, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.labels is not None and len(self.labels) != len(pts):
            raise ValueError("labels length must match point count")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self) -> str:
        """CSV text with header ``x,y,label`` and LF line endings."""
        from .serialize import format_float

        labels = self.labels if self.labels is not None else [""] * len(self)
        lines = ["x,y,label"]
        for (x, y), lab in zip(self.points, labels):
            lines.append(f"{format_float(x)},{format_float(y)},{lab}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PointSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split(",")[:2] != ["x", "y"]:
            raise ValueError("point CSV must start with an 'x,y,label' header")
        pts = []
        labels = []
        for ln in lines[1:]:
            cells = ln.split(",")
            pts.append((float(cells[0]), float(cells[1])))
            labels.append(cells[2] if len(cells) > 2 else "")
        has_labels = any(labels)
        return cls(np.array(pts, float), labels if has_labels else None)


@dataclass
class EllipseCloud:
    """Ellipses fit to random five-point subsets of one point set.

    ``attempted`` counts every conic fit, including the quintuples that did
    not produce an ellipse; ``seed`` is the RNG seed the cloud was drawn with.
    """

    ellipses: list[Ellipse]
    attempted: int
    seed: int
    _params: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.ellipses)

    @property
    def params(self) -> np.ndarray:
        """(M, 5) array of (cx, cy, major, minor, angle) rows."""
        if self._params is None:
            self._params = np.array([e.params() for e in self.ellipses], float).reshape(-1, 5)
        return self._params

    def fingerprint(self) -> str:
        """Stable digest of the member parameters, for cloud-sharing checks."""
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.params).tobytes()).hexdigest()[:16]


def _draw_quintuple_indices(rng: np.random.Generator, n_points: int, n_conics: int) -> np.ndarray:
    """Uniform 5-subsets of range(n_points), independent across rows."""
    rows_per_chunk = max(1, _SAMPLE_CHUNK_CELLS // n_points)
    out = np.empty((n_conics, 5), dtype=np.intp)
    done = 0
    while done < n_conics:
        m = min(rows_per_chunk, n_conics - done)
        keys = rng.random((m, n_points))
        out[done:done + m] = np.argpartition(keys, 4, axis=1)[:, :5]
        done += m
    return out


def sample_cloud(ps: PointSet, n_conics: int, seed: int) -> EllipseCloud:
    """Fit conics to ``n_conics`` random quintuples and keep the ellipses.

    Quintuples are drawn uniformly without replacement within each draw and
    independently across draws; retained ellipses keep draw order, so the
    result is fully determined by (points, n_conics, seed).

    Raises
    ------
    TooFewPoints
        If the point set has fewer than five points.
    EmptyCloud
        If no quintuple yields an ellipse.
    """
    if n_conics < 1:
        raise ValueError("n_conics must be >= 1")
    pts = ps.points
    if len(pts) < 5:
        raise TooFewPoints(f"need at least 5 points, got {len(pts)}")

    rng = np.random.default_rng(seed)
    idx = _draw_quintuple_indices(rng, len(pts), n_conics)
    coeffs, ok = fit_conics_batch(pts[idx])
    params, is_valid = conics_to_ellipses(coeffs)
    keep = ok & is_valid
    if not np.any(keep):
        raise EmptyCloud(f"none of {n_conics} sampled quintuples produced an ellipse")

    kept = params[keep]
    ellipses = [ellipse_from_params(row) for row in kept]
    return EllipseCloud(ellipses=ellipses, attempted=n_conics, seed=seed, _params=kept)


def median_center(cloud: EllipseCloud) -> np.ndarray:
    """Component-wise median of the cloud's ellipse centers."""
    if len(cloud) == 0:
        raise EmptyCloud("cannot take the median center of an empty cloud")
    return np.median(cloud.params[:, :2], axis=0)


def enclosing_mask(params: np.ndarray, center) -> np.ndarray:
    """Rows of ``params`` whose ellipse strictly contains ``center``."""
    cx, cy, major, minor, angle = (params[:, k] for k in range(5))
    px, py = float(center[0]), float(center[1])
    ca, sa = np.cos(angle), np.sin(angle)
    dx = px - cx
    dy = py - cy
    fx = ca * dx + sa * dy
    fy = -sa * dx + ca * dy
    return (fx / major) ** 2 + (fy / minor) ** 2 < 1.0


def ray_radii_matrix(params: np.ndarray, center, thetas: np.ndarray) -> np.ndarray:
    """Outgoing-ray radii from ``center`` for center-enclosing ellipse rows.

    Every row of ``params`` must strictly contain ``center``, which makes the
    outgoing intersection unique. Returns a (len(thetas), M) array.
    """
    cx, cy, major, minor, angle = (params[:, k] for k in range(5))
    px, py = float(center[0]), float(center[1])
    ca, sa = np.cos(angle), np.sin(angle)
    dx = px - cx
    dy = py - cy
    ox = ca * dx + sa * dy                     # (M,)
    oy = -sa * dx + ca * dy

    thetas = np.atleast_1d(np.asarray(thetas, float))
    ux = np.cos(thetas)[:, None]               # (K, 1)
    uy = np.sin(thetas)[:, None]
    fux = ca[None, :] * ux + sa[None, :] * uy  # (K, M)
    fuy = -sa[None, :] * ux + ca[None, :] * uy

    ia2 = 1.0 / (major * major)
    ib2 = 1.0 / (minor * minor)
    alpha = fux * fux * ia2 + fuy * fuy * ib2
    beta = 2.0 * (ox * fux * ia2 + oy * fuy * ib2)
    gamma = ox * ox * ia2 + oy * oy * ib2 - 1.0  # (M,), < 0 inside

    disc = beta * beta - 4.0 * alpha * gamma
    return (-beta + np.sqrt(disc)) / (2.0 * alpha)


def ray_radii(cloud: EllipseCloud, center, theta: float) -> np.ndarray:
    """Radii where the outgoing ray from ``center`` crosses enclosing members.

    Ellipses that do not strictly contain ``center`` contribute nothing; the
    result may be empty.
    """
    theta = float(theta) % (2.0 * math.pi)
    params = cloud.params
    if len(params) == 0:
        return np.empty(0)
    mask = enclosing_mask(params, center)
    if not np.any(mask):
        return np.empty(0)
    return ray_radii_matrix(params[mask], center, np.array([theta]))[0]
