"""Factor-grid benchmark: seeded synthetic runs, shared clouds, error medians.

Each run generates one point set, builds ONE ellipse cloud, and feeds that
same cloud to every cloud-consuming algorithm, so differences between
algorithms never come from sampling luck. Seeds derive from
(base_seed, case id, run index), making every cell independently
reproducible.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cloud import EllipseCloud, PointSet, sample_cloud
from .contour import KdeConfig, fit_median_contour, fit_mode_contour
from .errors import ContourFitError, UnknownAlgorithm
from .fitters import (
    RansacConfig,
    RhtConfig,
    auto_inlier_threshold,
    fit_ols,
    fit_ransac,
    fit_rht,
    fit_rosin_median,
)
from .geometry import Ellipse
from .serialize import csv_text, format_float
from .synth import SynthSpec, curve_error, generate

ALGORITHMS = ("ols", "ransac", "rht", "rosin", "median-contour", "mode-contour")

# Default synthetic geometry at pixel-like scale; noise sigma 1 is then ~0.7%
# of the major axis and sigma 10 is "high noise".
DEFAULT_TRUTH = Ellipse(250.0, 250.0, 150.0, 100.0, 0.4)
DEFAULT_OUTLIER = Ellipse(340.0, 330.0, 120.0, 80.0, -0.5)


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 63-bit stream seed from a base seed and context labels."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return (int.from_bytes(digest[:8], "big") ^ int(base_seed)) & ((1 << 63) - 1)


@dataclass(frozen=True)
class BenchSetup:
    """Geometry and per-algorithm policies shared by every case of a run."""

    truth: Ellipse = DEFAULT_TRUTH
    outlier_ellipse: Ellipse = DEFAULT_OUTLIER
    n_points: int = 600
    rays: int = 360
    kde: KdeConfig = KdeConfig()
    # None: twice the case's known noise sigma (the threshold is a required
    # external input of RANSAC; the harness knows the noise it generated),
    # falling back to the MAD-based policy on noise-free cases.
    ransac_threshold: float | None = None
    rht_bandwidth: float = 1.0


@dataclass(frozen=True)
class BenchCase:
    """One cell of the factor grid, run ``runs`` times."""

    n_conics: int
    outlier_ratio: float = 0.0
    occlusion_ratio: float = 0.0
    noise_sigma: float = 0.0
    algorithms: tuple[str, ...] = ALGORITHMS
    runs: int = 10
    base_seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.algorithms:
            raise ValueError("algorithms must be non-empty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise UnknownAlgorithm(f"unknown algorithm labels: {sorted(unknown)}")
        if not self.name:
            object.__setattr__(self, "name", self.default_name())

    def default_name(self) -> str:
        return (f"c{self.n_conics}-out{self.outlier_ratio:g}"
                f"-occ{self.occlusion_ratio:g}-sig{self.noise_sigma:g}")


@dataclass
class CellRecord:
    """One (algorithm, run) measurement."""

    algorithm: str
    run: int
    error: float
    time_fit: float
    time_cloud: float
    ok: bool
    message: str = ""


@dataclass
class BenchResult:
    case: BenchCase
    cells: list[CellRecord]
    cloud_fingerprints: list[str]
    cloud_sizes: list[int]

    def errors(self, algorithm: str) -> np.ndarray:
        """Per-run errors for one algorithm (NaN where the cell failed)."""
        if algorithm not in self.case.algorithms:
            raise UnknownAlgorithm(f"algorithm {algorithm!r} not in this case")
        out = np.full(self.case.runs, math.nan)
        for cell in self.cells:
            if cell.algorithm == algorithm:
                out[cell.run] = cell.error if cell.ok else math.nan
        return out

    def median_error(self, algorithm: str) -> float:
        errs = self.errors(algorithm)
        good = errs[np.isfinite(errs)]
        return float(np.median(good)) if good.size else math.nan

    @property
    def medians(self) -> dict[str, float]:
        return {a: self.median_error(a) for a in self.case.algorithms}


def run_algorithm(label: str, ps: PointSet, cloud: EllipseCloud,
                  setup: BenchSetup = BenchSetup(),
                  noise_sigma: float | None = None):
    """Run one labeled fitter on a prepared (point set, cloud) pair."""
    if label == "ols":
        init = fit_rosin_median(cloud)
        return fit_ols(ps.points, init).ellipse
    if label == "ransac":
        if setup.ransac_threshold is not None:
            thr = setup.ransac_threshold
        elif noise_sigma is not None and noise_sigma > 0.0:
            thr = 2.0 * noise_sigma
        else:
            thr = auto_inlier_threshold(ps, cloud)
        return fit_ransac(ps, cloud, RansacConfig(thr))
    if label == "rht":
        return fit_rht(cloud, RhtConfig(setup.rht_bandwidth))
    if label == "rosin":
        return fit_rosin_median(cloud)
    if label == "median-contour":
        return fit_median_contour(cloud, rays=setup.rays)
    if label == "mode-contour":
        return fit_mode_contour(cloud, rays=setup.rays, cfg=setup.kde)
    raise UnknownAlgorithm(f"unknown algorithm label {label!r}")


def run_case(case: BenchCase, setup: BenchSetup = BenchSetup()) -> BenchResult:
    """Execute all runs of one case; per-cell fitter errors never abort it."""
    cells: list[CellRecord] = []
    fingerprints: list[str] = []
    sizes: list[int] = []

    for run in range(case.runs):
        data_seed = derive_seed(case.base_seed, case.name, run, "data")
        cloud_seed = derive_seed(case.base_seed, case.name, run, "cloud")
        spec = SynthSpec(
            truth=setup.truth,
            n_points=setup.n_points,
            noise_sigma=case.noise_sigma,
            outlier_ratio=case.outlier_ratio,
            outlier_ellipse=setup.outlier_ellipse,
            occlusion_ratio=case.occlusion_ratio,
            seed=data_seed,
        )
        ps = generate(spec)
        t0 = time.perf_counter()
        cloud = sample_cloud(ps, case.n_conics, cloud_seed)
        time_cloud = time.perf_counter() - t0
        fingerprints.append(cloud.fingerprint())
        sizes.append(len(cloud))

        for label in case.algorithms:
            t0 = time.perf_counter()
            try:
                fit = run_algorithm(label, ps, cloud, setup, case.noise_sigma)
                elapsed = time.perf_counter() - t0
                err = curve_error(fit, setup.truth).mean_distance
                cells.append(CellRecord(label, run, err, elapsed, time_cloud, True))
            except ContourFitError as exc:
                elapsed = time.perf_counter() - t0
                cells.append(CellRecord(label, run, math.nan, elapsed, time_cloud,
                                        False, str(exc)))
    return BenchResult(case=case, cells=cells, cloud_fingerprints=fingerprints,
                       cloud_sizes=sizes)


# ---------------------------------------------------------------------------
# Sensitivity sweep over the cloud size
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    counts: list[int]
    algorithms: tuple[str, ...]
    median_errors: dict[tuple[int, str], float]
    results: list[BenchResult] = field(repr=False, default_factory=list)

    def normalized(self, algorithm: str) -> list[float]:
        """Median error at each count divided by the first count's error."""
        base = self.median_errors[(self.counts[0], algorithm)]
        return [self.median_errors[(c, algorithm)] / base for c in self.counts]


def sensitivity_sweep(counts, template: BenchCase,
                      setup: BenchSetup = BenchSetup()) -> SweepResult:
    """Rerun one case template at ascending cloud sizes."""
    counts = [int(c) for c in counts]
    if len(counts) < 2 or any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("counts must be >= 2 entries, strictly ascending")
    medians: dict[tuple[int, str], float] = {}
    results = []
    for count in counts:
        case = replace(template, n_conics=count, name="")
        result = run_case(case, setup)
        results.append(result)
        for algorithm in case.algorithms:
            medians[(count, algorithm)] = result.median_error(algorithm)
    return SweepResult(counts=counts, algorithms=template.algorithms,
                       median_errors=medians, results=results)


# ---------------------------------------------------------------------------
# Histogram of per-run errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    iqr: float


def error_histogram(result: BenchResult, algorithm: str, bins: int = 10) -> Histogram:
    """Bin the per-run errors of one algorithm and report their IQR."""
    errs = result.errors(algorithm)
    good = errs[np.isfinite(errs)]
    if good.size == 0:
        return Histogram(np.array([0.0, 0.0]), np.array([0]), math.nan)
    lo, hi = float(good.min()), float(good.max())
    if hi - lo <= 1e-15 * max(1.0, abs(hi)):
        edges = np.array([lo, hi])
        counts = np.array([good.size])
    else:
        edges = np.linspace(lo, hi, bins + 1)
        counts, _ = np.histogram(good, bins=edges)
    q75, q25 = np.percentile(good, [75.0, 25.0])
    return Histogram(bin_edges=edges, counts=counts, iqr=float(q75 - q25))


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def results_csv(results: list[BenchResult]) -> str:
    """Deterministic per-cell rows: case parameters, algorithm, run, error,
    cloud size and fingerprint. Wall times live in timings_csv."""
    header = ("case,n_conics,outlier_ratio,occlusion_ratio,noise_sigma,"
              "algorithm,run,error,status,cloud_size,cloud_fingerprint")
    rows = []
    for result in results:
        case = result.case
        for cell in sorted(result.cells, key=lambda c: (c.run, case.algorithms.index(c.algorithm))):
            rows.append(",".join([
                case.name,
                str(case.n_conics),
                format_float(case.outlier_ratio),
                format_float(case.occlusion_ratio),
                format_float(case.noise_sigma),
                cell.algorithm,
                str(cell.run),
                format_float(cell.error) if cell.ok else "nan",
                "ok" if cell.ok else f"failed:{cell.message.replace(',', ';')}",
                str(result.cloud_sizes[cell.run]),
                result.cloud_fingerprints[cell.run],
            ]))
    return csv_text(header, rows)


def timings_csv(results: list[BenchResult]) -> str:
    """Wall-clock seconds per cell: fit only, cloud build, and their sum.

    This is the one non-reproducible output; everything else is
    byte-identical across reruns of the same config and seed.
    """
    header = "case,algorithm,run,time_fit,time_cloud,time_total"
    rows = []
    for result in results:
        case = result.case
        for cell in sorted(result.cells, key=lambda c: (c.run, case.algorithms.index(c.algorithm))):
            rows.append(",".join([
                case.name,
                cell.algorithm,
                str(cell.run),
                format_float(cell.time_fit),
                format_float(cell.time_cloud),
                format_float(cell.time_fit + cell.time_cloud),
            ]))
    return csv_text(header, rows)


def summary_csv(results: list[BenchResult]) -> str:
    """One row per case, one median-error column per algorithm."""
    algorithms: list[str] = []
    for result in results:
        for a in result.case.algorithms:
            if a not in algorithms:
                algorithms.append(a)
    header = "case,n_conics,outlier_ratio,occlusion_ratio,noise_sigma," + \
        ",".join(algorithms)
    rows = []
    for result in results:
        case = result.case
        cells = [case.name, str(case.n_conics), format_float(case.outlier_ratio),
                 format_float(case.occlusion_ratio), format_float(case.noise_sigma)]
        for a in algorithms:
            if a in case.algorithms:
                cells.append(format_float(result.median_error(a)))
            else:
                cells.append("")
        rows.append(",".join(cells))
    return csv_text(header, rows)


def sweep_csv(sweep: SweepResult) -> str:
    header = "n_conics,algorithm,median_error,normalized"
    rows = []
    for count in sweep.counts:
        for algorithm in sweep.algorithms:
            err = sweep.median_errors[(count, algorithm)]
            base = sweep.median_errors[(sweep.counts[0], algorithm)]
            rows.append(",".join([
                str(count), algorithm, format_float(err), format_float(err / base),
            ]))
    return csv_text(header, rows)
