"""Image pipeline: threshold, clean, select, trace edges, extract boundary points.

Images are numpy arrays in row-major order: grayscale as uint8 (y = row index,
x = column index), binary as bool. A point extracted from pixel (row, col)
has coordinates (x=col, y=row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .cloud import PointSet, sample_cloud
from .contour import KdeConfig, PolarContour, fit_median_contour, fit_mode_contour
from .errors import ConstantImage, NoEdges, NoForeground, UnknownAlgorithm
from .fitters import RansacConfig, RhtConfig, auto_inlier_threshold, fit_ransac, fit_rht
from .geometry import Ellipse
from .synth import contour_area


# ---------------------------------------------------------------------------
# PGM (P5) I/O
# ---------------------------------------------------------------------------

def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) file into a uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        chunk = data[pos:pos + 1]
        if chunk == b"#":
            pos = data.index(b"\n", pos) + 1
        elif chunk.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if width < 16 or height < 16:
        raise ValueError(f"{path}: image must be at least 16x16, got {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).copy()


def write_pgm(path, image: np.ndarray) -> None:
    """Write a uint8 grayscale array as binary PGM (P5)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    img = img.astype(np.uint8)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _check_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] < 16 or img.shape[1] < 16:
        raise ValueError(f"expected a grayscale image >= 16x16, got shape {img.shape}")
    return img


# ---------------------------------------------------------------------------
# Otsu threshold
# ---------------------------------------------------------------------------

def otsu_threshold(img: np.ndarray) -> tuple[int, np.ndarray]:
    """Threshold maximizing the inter-class variance of the 256-bin histogram.

    Returns (threshold, foreground) where foreground marks pixels <= threshold
    (dark object on a light background). Ties pick the lowest threshold.
    """
    img = _check_gray(img).astype(np.uint8)
    hist = np.bincount(img.ravel(), minlength=256).astype(float)
    if np.count_nonzero(hist) < 2:
        raise ConstantImage("Otsu needs at least two distinct intensities")

    total = hist.sum()
    levels = np.arange(256, dtype=float)
    w0 = np.cumsum(hist)                       # pixels with intensity <= t
    m0 = np.cumsum(hist * levels)
    w1 = total - w0
    mu_total = m0[-1]

    with np.errstate(divide="ignore", invalid="ignore"):
        mean0 = m0 / w0
        mean1 = (mu_total - m0) / w1
        between = w0 * w1 * (mean0 - mean1) ** 2
    between[~np.isfinite(between)] = -1.0      # splits with an empty class
    threshold = int(np.argmax(between))
    return threshold, img <= threshold


# ---------------------------------------------------------------------------
# Morphology
# ---------------------------------------------------------------------------

MorphStep = tuple[str, int]


def disk_element(radius: int) -> np.ndarray:
    """Disk structuring element: offsets with dx^2 + dy^2 <= radius^2."""
    if radius < 1:
        raise ValueError("structuring element radius must be >= 1")
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    return dx * dx + dy * dy <= radius * radius


def parse_morph_program(text: str) -> list[MorphStep]:
    """Parse a program like ``erode:2,dilate:2`` into (op, radius) steps."""
    steps = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        op, _, radius = item.partition(":")
        op = op.strip().lower()
        if op not in ("dilate", "erode"):
            raise ValueError(f"unknown morphological op {op!r}")
        steps.append((op, int(radius)))
    if not steps:
        raise ValueError("morphology program is empty")
    return steps


def run_morph(binary: np.ndarray, program: list[MorphStep]) -> np.ndarray:
    """Apply a sequence of disk dilations/erosions (outside-image = background)."""
    if not program:
        raise ValueError("morphology program must be non-empty")
    out = np.asarray(binary, bool)
    for op, radius in program:
        element = disk_element(radius)
        if op == "dilate":
            out = ndimage.binary_dilation(out, structure=element)
        elif op == "erode":
            out = ndimage.binary_erosion(out, structure=element, border_value=0)
        else:
            raise ValueError(f"unknown morphological op {op!r}")
    return out


# ---------------------------------------------------------------------------
# Component selection
# ---------------------------------------------------------------------------

_EIGHT = np.ones((3, 3), bool)


def select_center_region(binary: np.ndarray) -> np.ndarray:
    """Keep the 8-connected component whose centroid is nearest the image
    center; ties go to the larger component."""
    binary = np.asarray(binary, bool)
    labels, count = ndimage.label(binary, structure=_EIGHT)
    if count == 0:
        raise NoForeground("no foreground component to select")
    center = (np.array(binary.shape, float) - 1.0) / 2.0
    centroids = ndimage.center_of_mass(binary, labels, range(1, count + 1))
    areas = ndimage.sum_labels(binary, labels, range(1, count + 1))
    d2 = [(cy - center[0]) ** 2 + (cx - center[1]) ** 2 for cy, cx in centroids]
    order = sorted(range(count), key=lambda k: (d2[k], -areas[k], k))
    return labels == order[0] + 1


# ---------------------------------------------------------------------------
# Canny edges
# ---------------------------------------------------------------------------

def canny_edges(img: np.ndarray, sigma: float = 2.0, lo: float = 0.1,
                hi: float = 0.3) -> np.ndarray:
    """Canny edge map: Gaussian smoothing, Sobel gradients, non-maximum
    suppression along the quantized gradient direction, then hysteresis with
    ``lo``/``hi`` as fractions of the maximum gradient magnitude."""
    img = _check_gray(img).astype(float)
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not 0.0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")

    smoothed = ndimage.gaussian_filter(img, sigma)
    gx = ndimage.sobel(smoothed, axis=1)
    gy = ndimage.sobel(smoothed, axis=0)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak == 0.0:
        return np.zeros(img.shape, bool)

    # quantize the gradient direction into 4 sectors (periodicity pi)
    angle = np.arctan2(gy, gx) % math.pi
    sector = ((angle + math.pi / 8) // (math.pi / 4)).astype(int) % 4
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}  # (drow, dcol)

    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    nms = np.zeros_like(mag)
    for s, (dr, dc) in offsets.items():
        fwd = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        back = padded[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        keep = (sector == s) & (mag > back) & (mag >= fwd)
        nms[keep] = mag[keep]

    strong = nms >= hi * peak
    weak = nms >= lo * peak
    return ndimage.binary_propagation(strong, mask=weak, structure=_EIGHT)


# ---------------------------------------------------------------------------
# Radially outermost edge points
# ---------------------------------------------------------------------------

def radial_outermost(edges: np.ndarray, center, bins: int = 360) -> PointSet:
    """Per angular bin about ``center``, keep the edge pixel of maximum radius.

    Empty bins contribute nothing; the output is ordered by bin index.
    """
    edges = np.asarray(edges, bool)
    rows, cols = np.nonzero(edges)
    if rows.size == 0:
        raise NoEdges("no edge pixels to select from")
    x = cols.astype(float)
    y = rows.astype(float)
    cx, cy = float(center[0]), float(center[1])
    theta = np.arctan2(y - cy, x - cx) % (2.0 * math.pi)
    radius = np.hypot(x - cx, y - cy)
    bin_idx = np.minimum((theta * bins / (2.0 * math.pi)).astype(int), bins - 1)

    best = np.full(bins, -1, dtype=np.intp)
    best_r = np.full(bins, -1.0)
    order = np.argsort(bin_idx, kind="stable")
    for k in order:
        b = bin_idx[k]
        if radius[k] > best_r[b]:
            best_r[b] = radius[k]
            best[b] = k
    chosen = best[best >= 0]
    return PointSet(np.column_stack([x[chosen], y[chosen]]))


# ---------------------------------------------------------------------------
# Synthetic raster blobs (test and demo inputs)
# ---------------------------------------------------------------------------

def render_blob(size: int, contour: PolarContour, inside: int = 40,
                outside: int = 200, stripes=None, noise_sigma: float = 0.0,
                seed: int = 0) -> np.ndarray:
    """Rasterize a star-shaped contour as a dark blob on a light background.

    ``stripes`` draws occluding dark bands (like suspension wires): each is
    (angle, half_width) for a band through the contour center. Gaussian pixel
    noise is added when ``noise_sigma`` > 0.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    dx = xx - contour.center[0]
    dy = yy - contour.center[1]
    theta = np.arctan2(dy, dx) % (2.0 * math.pi)
    radius = np.hypot(dx, dy)

    from .contour import contour_radius_at

    r_at = contour_radius_at(contour, theta.ravel()).reshape(theta.shape)
    img = np.full((size, size), float(outside))
    img[radius <= r_at] = float(inside)

    if stripes:
        for angle, half_width in stripes:
            ux, uy = math.cos(angle), math.sin(angle)
            perp = np.abs(-uy * dx + ux * dy)
            along = ux * dx + uy * dy
            img[(perp <= half_width) & (along >= 0.0)] = float(inside)

    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        img += rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Full droplet pipeline
# ---------------------------------------------------------------------------

DEFAULT_MORPH: list[MorphStep] = [("erode", 2), ("dilate", 2)]


@dataclass
class EdgeExtraction:
    """Boundary points of the central blob plus the stage byproducts."""

    points: PointSet
    centroid: tuple[float, float]
    region: np.ndarray = field(repr=False, default=None)
    morph_area: int = 0


@dataclass
class DropletResult:
    """Output of one image analysis: the fit, its area, and the edge points."""

    fit: PolarContour | Ellipse
    area: float
    points: PointSet
    region: np.ndarray = field(repr=False, default=None)
    morph_area: int = 0


def extract_edge_points(img: np.ndarray, program: list[MorphStep] = None,
                        bins: int = 360, canny_sigma: float = 2.0,
                        canny_lo: float = 0.1, canny_hi: float = 0.3) -> EdgeExtraction:
    """Threshold, clean, select the central blob, and trace its outer edges.

    Edge detection runs on the original image inside the padded bounding box
    of the selected region; per angular bin about the region centroid only
    the outermost edge pixel survives.
    """
    img = _check_gray(img)
    program = DEFAULT_MORPH if program is None else program

    _, binary = otsu_threshold(img)
    cleaned = run_morph(binary, program)
    region = select_center_region(cleaned)

    rows, cols = np.nonzero(region)
    centroid = (float(cols.mean()), float(rows.mean()))

    pad = int(math.ceil(3.0 * canny_sigma)) + max(r for _, r in program) + 2
    r0 = max(int(rows.min()) - pad, 0)
    r1 = min(int(rows.max()) + pad + 1, img.shape[0])
    c0 = max(int(cols.min()) - pad, 0)
    c1 = min(int(cols.max()) + pad + 1, img.shape[1])
    edges = np.zeros(img.shape, bool)
    if (r1 - r0) >= 16 and (c1 - c0) >= 16:
        edges[r0:r1, c0:c1] = canny_edges(img[r0:r1, c0:c1], canny_sigma,
                                          canny_lo, canny_hi)
    else:
        edges = canny_edges(img, canny_sigma, canny_lo, canny_hi)

    points = radial_outermost(edges, centroid, bins=bins)
    return EdgeExtraction(points=points, centroid=centroid, region=region,
                          morph_area=int(region.sum()))


def fit_edge_points(points: PointSet, cloud, fitter: str, rays: int = 360,
                    kde: KdeConfig = KdeConfig(),
                    ransac_threshold: float | None = None,
                    rht_bandwidth: float = 1.0):
    """Fit extracted edge points with one labeled algorithm; returns (fit, area)."""
    if fitter == "median-contour":
        fit = fit_median_contour(cloud, rays=rays)
        return fit, contour_area(fit)
    if fitter == "mode-contour":
        fit = fit_mode_contour(cloud, rays=rays, cfg=kde)
        return fit, contour_area(fit)
    if fitter == "ransac":
        thr = ransac_threshold if ransac_threshold is not None else \
            auto_inlier_threshold(points, cloud)
        fit = fit_ransac(points, cloud, RansacConfig(thr))
        return fit, fit.area
    if fitter == "rht":
        fit = fit_rht(cloud, RhtConfig(rht_bandwidth))
        return fit, fit.area
    raise UnknownAlgorithm(
        f"unknown fitter {fitter!r}; pick one of median-contour, "
        f"mode-contour, ransac, rht")


def analyze_droplet(img: np.ndarray, program: list[MorphStep] = None,
                    fitter: str = "median-contour", n_conics: int = 2000,
                    seed: int = 0, rays: int = 360, bins: int = 360,
                    canny_sigma: float = 2.0, canny_lo: float = 0.1,
                    canny_hi: float = 0.3, kde: KdeConfig = KdeConfig(),
                    ransac_threshold: float | None = None,
                    rht_bandwidth: float = 1.0) -> DropletResult:
    """Full single-image pipeline: extract edge points, then fit them.

    ``fitter`` is one of median-contour, mode-contour, ransac, rht. The area
    is the polygon area for contours and pi*major*minor for ellipse fits.
    """
    extraction = extract_edge_points(img, program, bins, canny_sigma,
                                     canny_lo, canny_hi)
    cloud = sample_cloud(extraction.points, n_conics, seed)
    fit, area = fit_edge_points(extraction.points, cloud, fitter, rays, kde,
                                ransac_threshold, rht_bandwidth)
    return DropletResult(fit=fit, area=area, points=extraction.points,
                         region=extraction.region,
                         morph_area=extraction.morph_area)
