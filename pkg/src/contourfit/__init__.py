"""Robust closed-contour fitting via median/mode ellipse parameterization."""

from .geometry import Conic, Ellipse, conic_to_ellipse, contains_point, ellipse_to_conic, fit_conic_five_points, is_ellipse, ray_intersect

__all__ = [
    "Conic",
    "Ellipse",
    "conic_to_ellipse",
    "contains_point",
    "ellipse_to_conic",
    "fit_conic_five_points",
    "is_ellipse",
    "ray_intersect",
]

__version__ = "0.1.0"
