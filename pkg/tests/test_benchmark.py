import numpy as np
import pytest

from coreg.benchmark import bench_scenario, loglog_slope, time_cell, timing_grid


def test_loglog_slope_recovers_power_law():
    x = np.array([100, 200, 500, 1000])
    assert loglog_slope(x, 3e-6 * x ** 1.7) == pytest.approx(1.7)


def test_bench_scenario_layout():
    sc = bench_scenario(500, 80, 3, 2)
    assert sc.p == 500 and sc.n == 80
    assert sc.sigma_spec.block_sizes == (100, 100, 100)
    assert sc.n_true_signals == 100


def test_time_cell_fields():
    cell = time_cell(bench_scenario(100, 60, 0, 2))
    assert set(cell) >= {"p", "n", "replications", "mean_seconds", "sd_seconds", "mean_K",
                         "cell_seconds"}
    assert cell["replications"] == 2 and cell["mean_seconds"] > 0


def test_small_grid_has_slopes():
    res = timing_grid((60, 120), (50, 100), fixed_p=50, fixed_n=60, n_replications=1)
    assert len(res["n_grid"]) == 2 and len(res["p_grid"]) == 2
    assert np.isfinite(res["slope_n"]) and np.isfinite(res["slope_p"])
