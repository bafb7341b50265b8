"""Command-line interface: synth, fit, bench, droplet.

Every command resolves its seed as --seed > CONTOURFIT_SEED > config file,
writes a JSON run record next to its outputs, and produces deterministic
CSV/SVG bytes for a given (config, seed) so runs can be replayed and diffed.
Wall-clock timings are the one exception and live in their own file.
"""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .bench import BenchCase, BenchSetup, derive_seed, error_histogram, run_algorithm
from .cloud import PointSet, sample_cloud
from .config import DROPLET_ALGORITHMS, Config, load_config, parse_ellipse_spec
from .contour import KdeConfig, PolarContour
from .errors import ConfigError, ContourFitError
from .fitters import fit_ols, fit_rosin_median
from .geometry import Ellipse
from .imaging import extract_edge_points, fit_edge_points, read_pgm
from .serialize import format_float
from .svgplot import histogram_svg, line_plot_svg, overlay_svg
from .synth import SynthSpec, contour_area, edge_deviation, generate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3

SEED_ENV_VAR = "CONTOURFIT_SEED"

FIT_ALGORITHMS = ("ols", "ransac", "rht", "rosin", "median-contour", "mode-contour")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _ratio(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"ratio must be in [0, 1), got {value}")
    return value


def resolve_seed(args, cfg: Config) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return cfg.seed


def write_run_record(path: Path, command: str, args, cfg: Config, seed: int,
                     outputs: list[str], started: float) -> None:
    record = {
        "command": command,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
        "config": cfg.snapshot(),
        "seed": seed,
        "started_unix": started,
        "finished_unix": time.time(),
        "outputs": outputs,
    }
    path.write_text(json.dumps(record, indent=2, default=str) + "\n")


def _setup_from_config(cfg: Config) -> BenchSetup:
    return BenchSetup(
        truth=cfg.bench_truth,
        outlier_ellipse=cfg.bench_outlier,
        n_points=cfg.bench_points,
        rays=cfg.rays,
        kde=KdeConfig(bandwidth=cfg.kde_bandwidth, grid_points=cfg.grid_points),
        ransac_threshold=cfg.ransac_threshold,
        rht_bandwidth=cfg.rht_bandwidth,
    )


def ellipse_record_json(e: Ellipse) -> str:
    return json.dumps({
        "cx": e.cx, "cy": e.cy, "major": e.major, "minor": e.minor,
        "angle": e.angle,
    }) + "\n"


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    started = time.time()

    truth = parse_ellipse_spec(args.truth) if args.truth else cfg.bench_truth
    outlier_ellipse = (parse_ellipse_spec(args.outlier_ellipse)
                       if args.outlier_ellipse else cfg.bench_outlier)

    if args.outliers is not None:
        n_out = args.outliers
    else:
        ratio = args.outlier_ratio or 0.0
        n_out = int(round(args.points * ratio / (1.0 - ratio)))
    n_points = args.points + n_out

    spec = SynthSpec(
        truth=truth,
        n_points=n_points,
        noise_sigma=args.noise,
        outlier_ratio=n_out / n_points if n_out else 0.0,
        outlier_ellipse=outlier_ellipse if n_out else None,
        occlusion_ratio=args.occlusion,
        seed=seed,
    )
    ps = generate(spec)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ps.to_csv())

    sidecar = out.parent / (out.name + ".cfg")
    sidecar.write_text(
        "[synth]\n"
        f"truth = {','.join(format_float(v) for v in truth.params())}\n"
        f"outlier_ellipse = {','.join(format_float(v) for v in outlier_ellipse.params())}\n"
        f"n_points = {spec.n_points}\n"
        f"noise_sigma = {format_float(spec.noise_sigma)}\n"
        f"outlier_ratio = {format_float(spec.outlier_ratio)}\n"
        f"occlusion_ratio = {format_float(spec.occlusion_ratio)}\n"
        f"seed = {seed}\n"
    )
    write_run_record(out.parent / (out.name + ".run.json"), "synth", args,
                     cfg, seed, [str(out), str(sidecar)], started)
    print(f"wrote {len(ps)} points ({spec.n_inliers} inlier, "
          f"{spec.n_outliers} outlier) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    started = time.time()

    ps = PointSet.from_csv(Path(args.points).read_text())
    cloud = sample_cloud(ps, args.conics, seed)
    setup = replace(_setup_from_config(cfg), rays=args.rays or cfg.rays)
    fit = run_algorithm(args.algo, ps, cloud, setup)

    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    outputs = []
    if isinstance(fit, PolarContour):
        fit_path = prefix.parent / (prefix.name + ".contour.csv")
        fit_path.write_text(fit.to_csv(include_center=True))
    else:
        fit_path = prefix.parent / (prefix.name + ".ellipse.json")
        fit_path.write_text(ellipse_record_json(fit))
    outputs.append(str(fit_path))

    svg_path = prefix.parent / (prefix.name + ".svg")
    svg_path.write_text(overlay_svg(ps.points, {args.algo: fit}, labels=ps.labels))
    outputs.append(str(svg_path))

    write_run_record(prefix.parent / (prefix.name + ".run.json"), "fit", args,
                     cfg, seed, outputs, started)
    print(f"fit {args.algo} on {len(ps)} points -> {fit_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_cases(cfg: Config, seed: int) -> list[BenchCase]:
    if cfg.bench_cases:
        return [
            BenchCase(n_conics=conics, outlier_ratio=outlier,
                      occlusion_ratio=occlusion, noise_sigma=sigma,
                      algorithms=cfg.bench_algorithms, runs=cfg.bench_runs,
                      base_seed=seed, name=name)
            for name, conics, outlier, occlusion, sigma in cfg.bench_cases
        ]
    return [
        BenchCase(n_conics=cfg.bench_conics, outlier_ratio=outlier,
                  occlusion_ratio=occlusion, noise_sigma=sigma,
                  algorithms=cfg.bench_algorithms, runs=cfg.bench_runs,
                  base_seed=seed)
        for outlier in cfg.bench_outlier_ratios
        for occlusion in cfg.bench_occlusion_ratios
        for sigma in cfg.bench_noise_sigmas
    ]


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    started = time.time()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    setup = _setup_from_config(cfg)
    cases = _bench_cases(cfg, seed)
    results = [bench_mod.run_case(case, setup) for case in cases]

    outputs = []
    for name, text in (("results.csv", bench_mod.results_csv(results)),
                       ("timings.csv", bench_mod.timings_csv(results)),
                       ("summary.csv", bench_mod.summary_csv(results))):
        path = outdir / name
        path.write_text(text)
        outputs.append(str(path))

    if cfg.bench_histograms:
        hist_dir = outdir / "hist"
        hist_dir.mkdir(exist_ok=True)
        for result in results:
            for algorithm in result.case.algorithms:
                hist = error_histogram(result, algorithm)
                path = hist_dir / f"{result.case.name}_{algorithm}.svg"
                path.write_text(histogram_svg(hist.bin_edges, hist.counts))
                outputs.append(str(path))

    if cfg.sweep_counts:
        template = BenchCase(
            n_conics=cfg.sweep_counts[0],
            outlier_ratio=cfg.sweep_outlier_ratio,
            occlusion_ratio=cfg.sweep_occlusion_ratio,
            noise_sigma=cfg.sweep_noise_sigma,
            algorithms=cfg.bench_algorithms,
            runs=cfg.bench_runs,
            base_seed=seed,
        )
        sweep = bench_mod.sensitivity_sweep(list(cfg.sweep_counts), template, setup)
        (outdir / "sweep.csv").write_text(bench_mod.sweep_csv(sweep))
        series = {a: sweep.normalized(a) for a in sweep.algorithms}
        (outdir / "sweep.svg").write_text(line_plot_svg(
            sweep.counts, series, x_label="conic count (log10)",
            y_label="error / error(first count)", log_x=True))
        outputs.extend([str(outdir / "sweep.csv"), str(outdir / "sweep.svg")])

    write_run_record(outdir / "run_record.json", "bench", args, cfg, seed,
                     outputs, started)
    print(f"bench: {len(cases)} cases x {cfg.bench_runs} runs -> {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# droplet
# ---------------------------------------------------------------------------

def _load_truth_contour(truth_dir: Path, stem: str) -> PolarContour | None:
    path = truth_dir / f"{stem}.csv"
    if not path.exists():
        return None
    return PolarContour.from_csv(path.read_text())


def cmd_droplet(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    started = time.time()

    images = sorted(glob.glob(args.images))
    if not images:
        print(f"error: no images matched {args.images!r}", file=sys.stderr)
        return EXIT_ERROR

    algorithms = tuple(args.algos) if args.algos else cfg.droplet_algorithms
    truth_dir = Path(args.truth_dir) if args.truth_dir else None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    kde = KdeConfig(bandwidth=cfg.kde_bandwidth, grid_points=cfg.grid_points)
    header = "image,algorithm,area,morph_area,edge_deviation,status"
    rows = []
    area_series = {a: [] for a in algorithms}
    dev_series = {a: [] for a in algorithms}
    indices = []
    failures = 0
    outputs = []

    for index, image_path in enumerate(images):
        stem = Path(image_path).stem
        truth = _load_truth_contour(truth_dir, stem) if truth_dir else None
        fits = {}
        try:
            img = read_pgm(image_path)
            extraction = extract_edge_points(
                img, cfg.morph_program, bins=cfg.droplet_bins,
                canny_sigma=cfg.canny_sigma, canny_lo=cfg.canny_lo,
                canny_hi=cfg.canny_hi)
            cloud = sample_cloud(extraction.points, cfg.droplet_conics,
                                 derive_seed(seed, stem))
        except (ContourFitError, ValueError, OSError) as exc:
            failures += 1
            for algorithm in algorithms:
                rows.append(f"{stem},{algorithm},nan,0,,failed:{exc}")
            continue

        indices.append(index)
        for algorithm in algorithms:
            try:
                fit, area = fit_edge_points(
                    extraction.points, cloud, algorithm, rays=cfg.rays,
                    kde=kde, ransac_threshold=cfg.ransac_threshold,
                    rht_bandwidth=cfg.rht_bandwidth)
                fits[algorithm] = fit
                deviation = edge_deviation(fit, truth) if truth is not None else None
                dev_text = format_float(deviation) if deviation is not None else ""
                rows.append(f"{stem},{algorithm},{format_float(area)},"
                            f"{extraction.morph_area},{dev_text},ok")
                area_series[algorithm].append(area)
                dev_series[algorithm].append(deviation if deviation is not None
                                             else math.nan)
            except ContourFitError as exc:
                failures += 1
                rows.append(f"{stem},{algorithm},nan,{extraction.morph_area},"
                            f",failed:{exc}")
                area_series[algorithm].append(math.nan)
                dev_series[algorithm].append(math.nan)

        if fits:
            overlay_path = outdir / f"{stem}_overlay.svg"
            overlay_path.write_text(overlay_svg(extraction.points.points, fits))
            outputs.append(str(overlay_path))

    report_path = outdir / "report.csv"
    report_path.write_text("\n".join([header, *rows]) + "\n")
    outputs.append(str(report_path))

    if indices:
        usable = {a: v for a, v in area_series.items() if len(v) == len(indices)}
        series_path = outdir / "areas.svg"
        series_path.write_text(line_plot_svg(
            list(range(len(indices))), usable, x_label="image index",
            y_label="area (px^2)"))
        outputs.append(str(series_path))
        if truth_dir is not None:
            dev_path = outdir / "deviations.svg"
            dev_path.write_text(line_plot_svg(
                list(range(len(indices))),
                {a: v for a, v in dev_series.items() if len(v) == len(indices)},
                x_label="image index", y_label="edge deviation (px)"))
            outputs.append(str(dev_path))

    write_run_record(outdir / "run_record.json", "droplet", args, cfg, seed,
                     outputs, started)
    print(f"droplet: {len(images)} images, {failures} failed cells -> {outdir}")
    return EXIT_OK if failures == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contourfit",
        description="Robust closed-contour fitting: median/mode ellipse "
                    "parameterization, baseline robust fitters, synthetic "
                    "benchmarks, and a droplet image pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (overrides {SEED_ENV_VAR} and config)")

    p_synth = sub.add_parser("synth", help="generate a synthetic point set CSV")
    p_synth.add_argument("--points", type=int, required=True,
                         help="number of inlier points on the truth ellipse")
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="Gaussian noise sigma")
    group = p_synth.add_mutually_exclusive_group()
    group.add_argument("--outliers", type=int, default=None,
                       help="outlier point count")
    group.add_argument("--outlier-ratio", type=_ratio, default=None,
                       help="outlier fraction of the total")
    p_synth.add_argument("--occlusion", type=_ratio, default=0.0,
                         help="occluded fraction of the truth arc")
    p_synth.add_argument("--truth", default=None,
                         help="truth ellipse as cx,cy,major,minor,angle")
    p_synth.add_argument("--outlier-ellipse", default=None,
                         help="outlier ellipse as cx,cy,major,minor,angle")
    p_synth.add_argument("--out", default="points.csv")
    common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_fit = sub.add_parser("fit", help="fit one algorithm to a point CSV")
    p_fit.add_argument("--points", required=True, help="input point CSV")
    p_fit.add_argument("--algo", required=True, choices=FIT_ALGORITHMS)
    p_fit.add_argument("--conics", type=int, default=2000,
                       help="random conic fits for the ellipse cloud")
    p_fit.add_argument("--rays", type=int, default=None)
    p_fit.add_argument("--out", default="fit")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_bench = sub.add_parser("bench", help="run the benchmark factor grid")
    p_bench.add_argument("--out", default="bench_out")
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_drop = sub.add_parser("droplet", help="analyze a PGM image sequence")
    p_drop.add_argument("--images", required=True, help="glob of PGM images")
    p_drop.add_argument("--out", default="droplet_out")
    p_drop.add_argument("--truth-dir", default=None,
                        help="directory of truth contour CSVs named <stem>.csv")
    p_drop.add_argument("--algos", nargs="*", choices=DROPLET_ALGORITHMS,
                        default=None)
    common(p_drop)
    p_drop.set_defaults(func=cmd_droplet)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ContourFitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
