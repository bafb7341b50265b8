import math

import numpy as np
import pytest

from contourfit.bench import (
    ALGORITHMS,
    BenchCase,
    BenchResult,
    BenchSetup,
    CellRecord,
    derive_seed,
    error_histogram,
    results_csv,
    run_case,
    sensitivity_sweep,
    summary_csv,
    sweep_csv,
    timings_csv,
)
from contourfit.errors import UnknownAlgorithm


def small_case(**overrides):
    defaults = dict(n_conics=300, outlier_ratio=0.0, occlusion_ratio=0.0,
                    noise_sigma=1.0, runs=3, base_seed=7)
    defaults.update(overrides)
    return BenchCase(**defaults)


class TestDeriveSeed:
    def test_stable_across_calls(self):
        assert derive_seed(1, "case", 0) == derive_seed(1, "case", 0)

    def test_varies_with_context(self):
        seeds = {derive_seed(1, "case", run, tag)
                 for run in range(3) for tag in ("data", "cloud")}
        assert len(seeds) == 6

    def test_range(self):
        s = derive_seed(123456, "x", 9)
        assert 0 <= s < 2 ** 63


class TestBenchCase:
    def test_default_name(self):
        case = small_case()
        assert case.name == "c300-out0-occ0-sig1"

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(UnknownAlgorithm):
            BenchCase(n_conics=10, algorithms=("voodoo",))

    def test_runs_validated(self):
        with pytest.raises(ValueError):
            BenchCase(n_conics=10, runs=0)


class TestRunCase:
    def test_exact_data_all_algorithms_near_zero(self):
        case = small_case(noise_sigma=0.0, runs=2)
        # enough rays that the contour's chord interpolation error at this
        # truth size (major 150) stays below the bound
        result = run_case(case, BenchSetup(rays=1440))
        for algorithm in ALGORITHMS:
            assert result.median_error(algorithm) < 1e-3, algorithm

    def test_bit_identical_rerun(self):
        case = small_case(runs=2, algorithms=("rosin", "median-contour"))
        a = run_case(case)
        b = run_case(case)
        assert a.cloud_fingerprints == b.cloud_fingerprints
        for algorithm in case.algorithms:
            np.testing.assert_array_equal(a.errors(algorithm), b.errors(algorithm))

    def test_one_cloud_shared_per_run(self):
        case = small_case(runs=2)
        result = run_case(case)
        assert len(result.cloud_fingerprints) == 2
        assert result.cloud_fingerprints[0] != result.cloud_fingerprints[1]

    def test_failed_cells_flagged_not_dropped(self, monkeypatch):
        import contourfit.bench as bench_mod
        from contourfit.errors import NoInliers

        real = bench_mod.run_algorithm

        def flaky(label, ps, cloud, setup=BenchSetup(), noise_sigma=None):
            if label == "ransac":
                raise NoInliers("synthetic failure")
            return real(label, ps, cloud, setup, noise_sigma)

        monkeypatch.setattr(bench_mod, "run_algorithm", flaky)
        case = small_case(runs=2, algorithms=("ransac", "rosin"))
        result = run_case(case)
        assert len(result.cells) == len(case.algorithms) * case.runs
        ransac_cells = [c for c in result.cells if c.algorithm == "ransac"]
        assert all(not c.ok and math.isnan(c.error) for c in ransac_cells)
        assert all("synthetic failure" in c.message for c in ransac_cells)
        rosin_cells = [c for c in result.cells if c.algorithm == "rosin"]
        assert all(c.ok for c in rosin_cells)
        assert math.isnan(result.median_error("ransac"))

    def test_median_matches_sort_oracle(self):
        case = small_case(runs=5, algorithms=("rosin",))
        result = run_case(case)
        errs = np.sort(result.errors("rosin"))
        assert result.median_error("rosin") == pytest.approx(errs[2])

    def test_errors_for_unknown_algorithm(self):
        result = run_case(small_case(runs=1, algorithms=("rosin",)))
        with pytest.raises(UnknownAlgorithm):
            result.errors("ols")


class TestSensitivitySweep:
    def test_counts_validation(self):
        case = small_case(algorithms=("rosin",))
        with pytest.raises(ValueError):
            sensitivity_sweep([100], case)
        with pytest.raises(ValueError):
            sensitivity_sweep([100, 100], case)

    def test_first_count_normalizes_to_one(self):
        case = small_case(runs=2, algorithms=("rosin", "median-contour"))
        sweep = sensitivity_sweep([100, 300], case)
        for algorithm in case.algorithms:
            norm = sweep.normalized(algorithm)
            assert norm[0] == pytest.approx(1.0)
            assert all(np.isfinite(norm))


def manual_result(errors_by_algorithm, runs):
    algorithms = tuple(errors_by_algorithm)
    case = BenchCase(n_conics=10, algorithms=algorithms, runs=runs)
    cells = [
        CellRecord(algorithm, run, err, 0.0, 0.0, True)
        for algorithm, errs in errors_by_algorithm.items()
        for run, err in enumerate(errs)
    ]
    return BenchResult(case=case, cells=cells,
                       cloud_fingerprints=["f"] * runs, cloud_sizes=[1] * runs)


class TestErrorHistogram:
    def test_constant_fitter_single_bin(self):
        result = manual_result({"rosin": [0.5] * 10}, runs=10)
        hist = error_histogram(result, "rosin")
        assert hist.counts.tolist() == [10]
        assert hist.iqr == 0.0

    def test_unknown_label(self):
        result = manual_result({"rosin": [0.5]}, runs=1)
        with pytest.raises(UnknownAlgorithm):
            error_histogram(result, "nope")

    def test_iqr_matches_percentiles(self):
        errs = [1.0, 2.0, 3.0, 4.0, 10.0]
        result = manual_result({"rosin": errs}, runs=5)
        hist = error_histogram(result, "rosin")
        q75, q25 = np.percentile(errs, [75, 25])
        assert hist.iqr == pytest.approx(q75 - q25)
        assert hist.counts.sum() == 5


class TestCsvEmission:
    def test_results_csv_shape_and_determinism(self):
        case = small_case(runs=2, algorithms=("rosin", "median-contour"))
        result = run_case(case)
        text = results_csv([result])
        lines = text.strip().split("\n")
        assert lines[0].startswith("case,n_conics,")
        assert len(lines) == 1 + len(case.algorithms) * case.runs
        assert text == results_csv([run_case(case)])
        assert "\r" not in text

    def test_timings_csv_shape(self):
        case = small_case(runs=1, algorithms=("rosin",))
        text = timings_csv([run_case(case)])
        lines = text.strip().split("\n")
        assert lines[0] == "case,algorithm,run,time_fit,time_cloud,time_total"
        assert len(lines) == 2

    def test_summary_csv_one_row_per_case(self):
        cases = [small_case(runs=1, algorithms=("rosin",)),
                 small_case(runs=1, noise_sigma=2.0, algorithms=("rosin",))]
        results = [run_case(c) for c in cases]
        lines = summary_csv(results).strip().split("\n")
        assert len(lines) == 3
        assert lines[0].endswith(",rosin")

    def test_sweep_csv(self):
        case = small_case(runs=1, algorithms=("rosin",))
        sweep = sensitivity_sweep([100, 200], case)
        lines = sweep_csv(sweep).strip().split("\n")
        assert lines[0] == "n_conics,algorithm,median_error,normalized"
        assert len(lines) == 3  # header + 2 counts x 1 algorithm
