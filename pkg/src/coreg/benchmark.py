"""Wall-clock scaling of the CoReg pipeline over grids of n and p."""
import time

import numpy as np

from .factor import DEFAULT_LAMBDA_GRID
from .network import DEFAULT_THRESHOLD
from .numerics import RngStream, covariance_root
from .pipeline import run_coreg
from .simulation import BlockSigmaSpec, ScenarioSpec, generate_block_sigma, generate_dataset

__all__ = ["N_GRID", "P_GRID", "bench_scenario", "time_cell", "timing_grid", "loglog_slope"]

N_GRID = (100, 200, 300, 400, 500, 600, 700, 800, 900, 1000)
P_GRID = (100, 200, 500, 1000, 2000)


def bench_scenario(p, n, master_seed=0, n_replications=20):
    """Default block design scaled to ``p``: three blocks of ``p // 5`` plus singletons.

    The within-block spread shrinks like ``1 / sqrt(block size)`` past 100
    nodes so that the PSD repair keeps the block means.
    """
    b = p // 5
    sd = 0.05 * min(1.0, np.sqrt(100.0 / b))
    sigma_spec = BlockSigmaSpec(block_sizes=(b, b, b), within_block_sd=sd,
                                n_singleton_vars=p - 3 * b)
    return ScenarioSpec(sigma_spec=sigma_spec, n=n, n_true_signals=max(1, p // 5),
                        n_replications=n_replications, master_seed=master_seed,
                        name=f"bench_p{p}_n{n}")


def time_cell(scenario, lambda_grid=DEFAULT_LAMBDA_GRID, threshold=DEFAULT_THRESHOLD):
    """Time ``run_coreg`` over every replication; the covariance is drawn once per cell."""
    start = time.perf_counter()
    sigma = generate_block_sigma(scenario.sigma_spec, RngStream(scenario.master_seed).generator(0))
    root = covariance_root(sigma)
    fits = []
    for rep in range(scenario.n_replications):
        data = generate_dataset(scenario, rep, sigma=sigma, root=root)
        t0 = time.perf_counter()
        res = run_coreg(data.Y, data.design, lambda_grid=lambda_grid, threshold=threshold)
        fits.append((time.perf_counter() - t0, res.K))
    seconds = np.array([f[0] for f in fits])
    return {
        "p": scenario.p,
        "n": scenario.n,
        "replications": scenario.n_replications,
        "mean_seconds": float(seconds.mean()),
        "sd_seconds": float(seconds.std(ddof=1)) if seconds.size > 1 else 0.0,
        "mean_K": float(np.mean([f[1] for f in fits])),
        "cell_seconds": time.perf_counter() - start,
    }


def loglog_slope(x, y):
    """Least-squares slope of log(y) on log(x)."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def timing_grid(n_grid=N_GRID, p_grid=P_GRID, fixed_p=200, fixed_n=100, n_replications=20,
                master_seed=0, lambda_grid=DEFAULT_LAMBDA_GRID, threshold=DEFAULT_THRESHOLD,
                progress=None):
    """Both timing grids plus fitted log-log slopes of mean runtime."""
    out = {"n_grid": [], "p_grid": []}
    for n in n_grid:
        cell = time_cell(bench_scenario(fixed_p, n, master_seed, n_replications),
                         lambda_grid, threshold)
        out["n_grid"].append(cell)
        if progress:
            progress(cell)
    for p in p_grid:
        cell = time_cell(bench_scenario(p, fixed_n, master_seed, n_replications),
                         lambda_grid, threshold)
        out["p_grid"].append(cell)
        if progress:
            progress(cell)
    for key, axis in (("n_grid", "n"), ("p_grid", "p")):
        cells = out[key]
        if len(cells) >= 2:
            out[f"slope_{axis}"] = loglog_slope([c[axis] for c in cells],
                                                [c["mean_seconds"] for c in cells])
    return out
