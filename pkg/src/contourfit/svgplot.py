"""Minimal deterministic SVG emission for points, fits, line plots, histograms.

Output is plain SVG 1.1 text with fixed number formatting, so identical data
always produces identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from .contour import PolarContour
from .geometry import Ellipse

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(value: float) -> str:
    return f"{float(value):.3f}"


def _document(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


class _DataFrame:
    """Affine map from data coordinates to a padded SVG viewport (y up)."""

    def __init__(self, xs, ys, width, height, pad=40.0):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        x_lo, x_hi = float(xs.min()), float(xs.max())
        y_lo, y_hi = float(ys.min()), float(ys.max())
        x_span = (x_hi - x_lo) or 1.0
        y_span = (y_hi - y_lo) or 1.0
        self.sx = (width - 2 * pad) / x_span
        self.sy = (height - 2 * pad) / y_span
        self.x_lo, self.y_lo = x_lo, y_lo
        self.height, self.pad = height, pad
        self.x_hi, self.y_hi = x_hi, y_hi

    def x(self, v) -> float:
        return self.pad + (v - self.x_lo) * self.sx

    def y(self, v) -> float:
        return self.height - self.pad - (v - self.y_lo) * self.sy


def _polyline(points, color: str, closed: bool = False, width: float = 1.5) -> str:
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    tag = "polygon" if closed else "polyline"
    return (f'<{tag} points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"/>')


def _fit_polygon(fit, n: int = 360) -> np.ndarray:
    if isinstance(fit, PolarContour):
        return fit.points()
    if isinstance(fit, Ellipse):
        return fit.boundary(np.linspace(0, 2 * math.pi, n, endpoint=False))
    raise TypeError(f"cannot plot a fit of type {type(fit).__name__}")


def overlay_svg(points: np.ndarray, fits: dict, width: int = 640,
                height: int = 640, labels=None) -> str:
    """Scatter of data points with closed fit outlines on top.

    ``fits`` maps a legend name to a PolarContour or Ellipse; ``labels``
    optionally colors points by their provenance label.
    """
    points = np.asarray(points, float)
    polys = {name: _fit_polygon(fit) for name, fit in fits.items()}
    all_x = np.concatenate([points[:, 0]] + [p[:, 0] for p in polys.values()])
    all_y = np.concatenate([points[:, 1]] + [p[:, 1] for p in polys.values()])
    frame = _DataFrame(all_x, all_y, width, height)

    body = ['<rect width="100%" height="100%" fill="white"/>']
    label_colors = {}
    if labels is not None:
        for lab in labels:
            if lab not in label_colors:
                label_colors[lab] = "#555555" if lab == "inlier" else "#bbbbbb"
    for k, (x, y) in enumerate(points):
        color = label_colors.get(labels[k], "#555555") if labels is not None else "#555555"
        body.append(f'<circle cx="{_fmt(frame.x(x))}" cy="{_fmt(frame.y(y))}" '
                    f'r="1.5" fill="{color}"/>')
    for idx, (name, poly) in enumerate(polys.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        mapped = [(frame.x(x), frame.y(y)) for x, y in poly]
        body.append(_polyline(mapped, color, closed=True))
        body.append(f'<text x="{_fmt(10)}" y="{_fmt(16 + 14 * idx)}" '
                    f'font-size="12" fill="{color}">{name}</text>')
    return _document(width, height, body)


def contour_svg(contour: PolarContour, width: int = 480, height: int = 480) -> str:
    """A single closed contour outline."""
    return overlay_svg(contour.points(), {"contour": contour}, width, height)


def _axes(frame: _DataFrame, x_label: str, y_label: str, width: int) -> list[str]:
    body = []
    x0, y0 = frame.pad, frame.height - frame.pad
    x1, y1 = width - frame.pad, frame.pad
    body.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
                f'y2="{_fmt(y0)}" stroke="black"/>')
    body.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" '
                f'y2="{_fmt(y1)}" stroke="black"/>')
    body.append(f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(frame.height - 8)}" '
                f'font-size="12" text-anchor="middle">{x_label}</text>')
    body.append(f'<text x="{_fmt(12)}" y="{_fmt((y0 + y1) / 2)}" font-size="12" '
                f'text-anchor="middle" transform="rotate(-90 12 '
                f'{_fmt((y0 + y1) / 2)})">{y_label}</text>')
    for v, label in ((frame.x_lo, frame.x_lo), (frame.x_hi, frame.x_hi)):
        body.append(f'<text x="{_fmt(frame.x(v))}" y="{_fmt(y0 + 14)}" '
                    f'font-size="10" text-anchor="middle">{label:.6g}</text>')
    for v in (frame.y_lo, frame.y_hi):
        body.append(f'<text x="{_fmt(x0 - 4)}" y="{_fmt(frame.y(v) + 3)}" '
                    f'font-size="10" text-anchor="end">{v:.6g}</text>')
    return body


def line_plot_svg(x_values, series: dict, x_label: str = "", y_label: str = "",
                  width: int = 640, height: int = 480, log_x: bool = False) -> str:
    """Multi-series line plot; ``series`` maps a name to a list of y values."""
    xs = np.log10(np.asarray(x_values, float)) if log_x else np.asarray(x_values, float)
    ys = np.concatenate([np.asarray(v, float) for v in series.values()])
    frame = _DataFrame(xs, ys, width, height)
    body = ['<rect width="100%" height="100%" fill="white"/>']
    body.extend(_axes(frame, x_label, y_label, width))
    for idx, (name, values) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        mapped = [(frame.x(x), frame.y(y)) for x, y in zip(xs, values)]
        body.append(_polyline(mapped, color))
        for x, y in mapped:
            body.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.5" '
                        f'fill="{color}"/>')
        body.append(f'<text x="{_fmt(width - frame.pad + 4)}" '
                    f'y="{_fmt(16 + 14 * idx)}" font-size="12" '
                    f'fill="{color}">{name}</text>')
    return _document(width, height, body)


def histogram_svg(bin_edges, counts, x_label: str = "error",
                  width: int = 480, height: int = 360) -> str:
    """Bar rendering of a pre-binned histogram."""
    edges = np.asarray(bin_edges, float)
    counts = np.asarray(counts, float)
    if edges.size == 2 and edges[0] == edges[1]:
        edges = np.array([edges[0] - 0.5, edges[0] + 0.5])
    frame = _DataFrame(edges, np.append(counts, 0.0), width, height)
    body = ['<rect width="100%" height="100%" fill="white"/>']
    body.extend(_axes(frame, x_label, "runs", width))
    for k, count in enumerate(counts):
        x0 = frame.x(edges[k])
        x1 = frame.x(edges[k + 1])
        y0 = frame.y(0.0)
        y1 = frame.y(count)
        body.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" '
                    f'width="{_fmt(max(x1 - x0 - 1.0, 1.0))}" '
                    f'height="{_fmt(max(y0 - y1, 0.0))}" fill="#1f77b4"/>')
    return _document(width, height, body)
