"""Declarative INI configuration shared by the CLI commands.

A config file is a flat key/value file with one section per concern; every
key is validated and unknown keys are rejected, so a saved snapshot replays
exactly. Command-line flags override file values; the CONTOURFIT_SEED
environment variable overrides the file seed and is itself overridden by
--seed.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .bench import ALGORITHMS, DEFAULT_OUTLIER, DEFAULT_TRUTH
from .errors import ConfigError
from .geometry import Ellipse
from .imaging import DEFAULT_MORPH, MorphStep, parse_morph_program

DROPLET_ALGORITHMS = ("median-contour", "mode-contour", "ransac", "rht")


def parse_ellipse_spec(text: str) -> Ellipse:
    """Parse 'cx,cy,major,minor,angle' into an Ellipse."""
    cells = [float(v) for v in text.split(",")]
    if len(cells) != 5:
        raise ConfigError(f"ellipse spec needs 5 comma-separated values, got {text!r}")
    try:
        return Ellipse(*cells)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_float_or_auto(text: str, key: str) -> float | None:
    text = text.strip()
    if text.lower() == "auto":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number or 'auto', got {text!r}") from exc


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_labels(text: str, allowed: tuple[str, ...], key: str) -> tuple[str, ...]:
    labels = tuple(lab.strip() for lab in text.split(",") if lab.strip())
    unknown = set(labels) - set(allowed)
    if unknown:
        raise ConfigError(f"{key}: unknown algorithm labels {sorted(unknown)}; "
                          f"valid: {', '.join(allowed)}")
    if not labels:
        raise ConfigError(f"{key}: needs at least one algorithm label")
    return labels


@dataclass
class Config:
    """Tool-wide settings with per-module sections."""

    # [general]
    rays: int = 360
    seed: int = 0
    kde_bandwidth: float | None = None         # None = Silverman per ray
    grid_points: int = 512
    # [ransac]
    ransac_threshold: float | None = None      # None = auto policy
    # [rht]
    rht_bandwidth: float = 1.0
    # [canny]
    canny_sigma: float = 2.0
    canny_lo: float = 0.1
    canny_hi: float = 0.3
    # [morph]
    morph_program: list[MorphStep] = field(default_factory=lambda: list(DEFAULT_MORPH))
    # [droplet]
    droplet_bins: int = 360
    droplet_conics: int = 2000
    droplet_algorithms: tuple[str, ...] = DROPLET_ALGORITHMS
    # [bench]
    bench_truth: Ellipse = DEFAULT_TRUTH
    bench_outlier: Ellipse = DEFAULT_OUTLIER
    bench_points: int = 600
    bench_runs: int = 10
    bench_conics: int = 2000
    bench_outlier_ratios: tuple[float, ...] = (0.1, 0.4)
    bench_occlusion_ratios: tuple[float, ...] = (0.1, 0.4)
    bench_noise_sigmas: tuple[float, ...] = (1.0, 10.0)
    bench_algorithms: tuple[str, ...] = ALGORITHMS
    bench_histograms: bool = True
    # [cases] name -> (conics, outlier, occlusion, sigma); overrides the grid
    bench_cases: list[tuple[str, int, float, float, float]] = field(default_factory=list)
    # [sweep]
    sweep_counts: tuple[int, ...] = ()
    sweep_outlier_ratio: float = 0.1
    sweep_occlusion_ratio: float = 0.1
    sweep_noise_sigma: float = 1.0

    def validate(self) -> None:
        if self.rays < 8:
            raise ConfigError("general.rays must be >= 8")
        if self.grid_points < 256:
            raise ConfigError("general.grid_points must be >= 256")
        if self.kde_bandwidth is not None and self.kde_bandwidth <= 0:
            raise ConfigError("general.kde_bandwidth must be > 0 or 'auto'")
        if self.ransac_threshold is not None and self.ransac_threshold <= 0:
            raise ConfigError("ransac.threshold must be > 0 or 'auto'")
        if self.rht_bandwidth <= 0:
            raise ConfigError("rht.bandwidth must be > 0")
        if self.canny_sigma <= 0:
            raise ConfigError("canny.sigma must be > 0")
        if not 0 <= self.canny_lo < self.canny_hi:
            raise ConfigError("canny thresholds need 0 <= lo < hi")
        if not self.morph_program:
            raise ConfigError("morph.program must be non-empty")
        for ratios in (self.bench_outlier_ratios, self.bench_occlusion_ratios):
            if any(not 0 <= r < 1 for r in ratios):
                raise ConfigError("bench ratios must be in [0, 1)")

    def snapshot(self) -> dict:
        """JSON-ready snapshot sufficient to replay a run."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Ellipse):
                value = list(value.params())
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_SCHEMA = {
    "general": {"rays", "seed", "kde_bandwidth", "grid_points"},
    "ransac": {"threshold"},
    "rht": {"bandwidth"},
    "canny": {"sigma", "lo", "hi"},
    "morph": {"program"},
    "droplet": {"bins", "conics", "algorithms"},
    "bench": {"truth", "outlier", "points", "runs", "conics", "outlier_ratios",
              "occlusion_ratios", "noise_sigmas", "algorithms", "histograms"},
    "cases": None,                              # free-form case names
    "sweep": {"counts", "outlier_ratio", "occlusion_ratio", "noise_sigma"},
}


def load_config(path=None) -> Config:
    """Read and validate a config file; None gives the defaults."""
    cfg = Config()
    if path is None:
        cfg.validate()
        return cfg

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        allowed = _SCHEMA[section]
        for key, value in parser.items(section):
            if allowed is not None and key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            _apply(cfg, section, key, value)
    cfg.validate()
    return cfg


def _apply(cfg: Config, section: str, key: str, value: str) -> None:
    try:
        if section == "general":
            if key == "rays":
                cfg.rays = int(value)
            elif key == "seed":
                cfg.seed = int(value)
            elif key == "kde_bandwidth":
                cfg.kde_bandwidth = _parse_float_or_auto(value, "general.kde_bandwidth")
            elif key == "grid_points":
                cfg.grid_points = int(value)
        elif section == "ransac":
            cfg.ransac_threshold = _parse_float_or_auto(value, "ransac.threshold")
        elif section == "rht":
            cfg.rht_bandwidth = float(value)
        elif section == "canny":
            if key == "sigma":
                cfg.canny_sigma = float(value)
            elif key == "lo":
                cfg.canny_lo = float(value)
            elif key == "hi":
                cfg.canny_hi = float(value)
        elif section == "morph":
            cfg.morph_program = parse_morph_program(value)
        elif section == "droplet":
            if key == "bins":
                cfg.droplet_bins = int(value)
            elif key == "conics":
                cfg.droplet_conics = int(value)
            elif key == "algorithms":
                cfg.droplet_algorithms = _parse_labels(value, DROPLET_ALGORITHMS,
                                                       "droplet.algorithms")
        elif section == "bench":
            if key == "truth":
                cfg.bench_truth = parse_ellipse_spec(value)
            elif key == "outlier":
                cfg.bench_outlier = parse_ellipse_spec(value)
            elif key == "points":
                cfg.bench_points = int(value)
            elif key == "runs":
                cfg.bench_runs = int(value)
            elif key == "conics":
                cfg.bench_conics = int(value)
            elif key == "outlier_ratios":
                cfg.bench_outlier_ratios = tuple(float(v) for v in value.split(","))
            elif key == "occlusion_ratios":
                cfg.bench_occlusion_ratios = tuple(float(v) for v in value.split(","))
            elif key == "noise_sigmas":
                cfg.bench_noise_sigmas = tuple(float(v) for v in value.split(","))
            elif key == "algorithms":
                cfg.bench_algorithms = _parse_labels(value, ALGORITHMS,
                                                     "bench.algorithms")
            elif key == "histograms":
                cfg.bench_histograms = _parse_bool(value, "bench.histograms")
        elif section == "cases":
            cells = value.split()
            if len(cells) != 4:
                raise ConfigError(
                    f"case {key!r}: expected 'conics outlier occlusion sigma'")
            cfg.bench_cases.append((key, int(cells[0]), float(cells[1]),
                                    float(cells[2]), float(cells[3])))
        elif section == "sweep":
            if key == "counts":
                cfg.sweep_counts = tuple(int(v) for v in value.split(","))
            elif key == "outlier_ratio":
                cfg.sweep_outlier_ratio = float(value)
            elif key == "occlusion_ratio":
                cfg.sweep_occlusion_ratio = float(value)
            elif key == "noise_sigma":
                cfg.sweep_noise_sigma = float(value)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc
