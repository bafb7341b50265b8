"""Exception types raised across the library."""


class ContourFitError(Exception):
    """Base class for all contourfit errors."""


class DegenerateQuintuple(ContourFitError):
    """The five-point data matrix has rank < 5: no unique conic exists."""


class NotAnEllipse(ContourFitError):
    """A conic (or an iterate) does not describe a real, non-degenerate ellipse."""


class TooFewPoints(ContourFitError):
    """An operation received fewer points than it requires."""


class EmptyCloud(ContourFitError):
    """No sampled quintuple produced an ellipse, or a cloud-consuming op got an empty cloud."""


class EmptyIntersections(ContourFitError):
    """A radius statistic was requested for an empty intersection list."""


class EmptyInput(ContourFitError):
    """A statistic was requested for an empty sample."""


class NoEnclosingEllipse(ContourFitError):
    """A contour ray found no cloud ellipse enclosing the center.

    Carries the offending ray angle in ``theta``.
    """

    def __init__(self, theta: float):
        self.theta = float(theta)
        super().__init__(f"no cloud ellipse encloses the center (ray theta={theta:.6g})")


class NoInliers(ContourFitError):
    """The best consensus candidate has zero inliers."""


class SpecInvalid(ContourFitError):
    """A synthetic-data specification violates its invariants."""


class ConstantImage(ContourFitError):
    """Thresholding was asked of an image with a single intensity."""


class NoForeground(ContourFitError):
    """A binary image contains no foreground component."""


class NoEdges(ContourFitError):
    """An edge image contains no edge pixels."""


class UnknownAlgorithm(ContourFitError):
    """An algorithm label is not one of the registered fitters."""


class ConfigError(ContourFitError):
    """A configuration file or value is invalid (unknown key, bad range)."""
