"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated
in the terminal summary. ``python tests/test_acceptance.py`` runs them without
pytest and prints the same lines.
"""
import time

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from coreg.benchmark import timing_grid
from coreg.factor import (DEFAULT_LAMBDA_GRID, block_factor_covariance, build_loadings,
                          factor_scores, reconstruct_covariance)
from coreg.inference import bh_adjust, fit_coreg
from coreg.network import ModulePartition, build_graph, extract_modules, peel_densest
from coreg.pipeline import run_coreg
from coreg.regression import fit_ols, make_design
from coreg.simulation import (ScenarioSpec, generate_dataset, run_replicability, run_scenario,
                              with_overrides)

from conftest import (ACCEPTANCE_LINES, block_correlation, brute_force_best_subset,
                      random_weight_graph, step_up_oracle)


def report(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_01_regression_identities():
    t0 = time.perf_counter()
    worst = {"B": 0.0, "XF": 0.0, "Gamma": 0.0, "excess": -np.inf}
    for seed in range(50):
        g = np.random.default_rng(1000 + seed)
        n = int(g.integers(30, 101))
        p = int(g.integers(10, 51))
        K = int(g.integers(1, 6))
        design = make_design(g.normal(size=(int(g.integers(1, 4)), n)))
        Y = g.normal(size=(p, n)) + g.normal(size=(p, 1)) * g.normal(size=(1, n))
        step1 = fit_ols(Y, design)
        E = step1.residuals
        labels = g.integers(0, K + 1, size=p)
        labels[:2 * K] = np.repeat(np.arange(1, K + 1), 2)
        mods = [np.flatnonzero(labels == k).tolist() for k in range(1, K + 1)]
        part = ModulePartition(mods, np.flatnonzero(labels == 0).tolist(), 1.5)
        L = build_loadings(part)
        F = factor_scores(L, E)
        fit = fit_coreg(Y, design, F)
        gamma_seq = E @ F.T @ np.linalg.inv(F @ F.T)
        worst["B"] = max(worst["B"], np.abs(fit.B_hat - step1.B_hat).max())
        worst["XF"] = max(worst["XF"], np.abs(design.X @ F.T).max())
        worst["Gamma"] = max(worst["Gamma"], np.abs(fit.Gamma_hat - gamma_seq).max())
        excess = np.sum((E - fit.Gamma_hat @ F) ** 2) - np.sum((E - L.L @ F) ** 2)
        worst["excess"] = max(worst["excess"], excess)
    elapsed = time.perf_counter() - t0
    ok = (worst["B"] <= 1e-9 and worst["XF"] <= 1e-8 and worst["Gamma"] <= 1e-9
          and worst["excess"] <= 1e-8 and elapsed < 10)
    report(1, ok, f"max|dB|={worst['B']:.1e} max|XF'|={worst['XF']:.1e} "
                  f"max|dGamma|={worst['Gamma']:.1e} max fit excess={worst['excess']:.1e} "
                  f"({elapsed:.2f} s)")
    assert ok


def test_criterion_02_block_reconstruction():
    t0 = time.perf_counter()
    R = block_correlation([100, 100, 100, 200], [0.8, 0.6, 0.4, 0.0], inter={(0, 1): -0.4})
    part = ModulePartition([range(0, 100), range(100, 200), range(200, 300)], range(300, 500),
                           1.5)
    D = R - reconstruct_covariance(build_loadings(part), block_factor_covariance(R, part))
    err = np.abs(D[~np.eye(500, dtype=bool)]).max()
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-10 and elapsed < 1
    report(2, ok, f"max off-diagonal residual {err:.1e} ({elapsed:.3f} s)")
    assert ok


def planted_graph(seed):
    # Exact block-constant within weights; cross entries are +-0.05 with random sign.
    g = np.random.default_rng(seed)
    sizes, means = (20, 20, 20), (0.8, 0.6, 0.4)
    R = np.where(g.uniform(size=(60, 60)) < 0.5, -0.05, 0.05)
    start = 0
    for s, m in zip(sizes, means):
        R[start:start + s, start:start + s] = m
        start += s
    R = np.triu(R, 1)
    R = R + R.T + np.eye(60)
    perm = g.permutation(60)
    truth = np.repeat([1, 2, 3], 20)
    return R[np.ix_(perm, perm)], truth[perm]


def test_criterion_03_module_recovery():
    t0 = time.perf_counter()
    worst = 1.0
    for seed in range(20):
        R, truth = planted_graph(seed)
        g = build_graph(R)
        cache = {}
        for lam in DEFAULT_LAMBDA_GRID:
            labels = extract_modules(g, lam, cache=cache).labels()
            worst = min(worst, adjusted_rand_score(truth, labels))
    elapsed = time.perf_counter() - t0
    ok = worst == 1.0 and elapsed < 5
    report(3, ok, f"min adjusted Rand over 20 seeds x {len(DEFAULT_LAMBDA_GRID)} lambdas = "
                  f"{worst:.3f} ({elapsed:.2f} s)")
    assert ok


def test_criterion_04_greedy_vs_oracle():
    t0 = time.perf_counter()
    above_oracle, near = 0, 0
    for seed in range(100):
        g = np.random.default_rng(5000 + seed)
        p = int(g.integers(4, 13))
        lam = float(g.choice(DEFAULT_LAMBDA_GRID))
        W = random_weight_graph(g, p)
        subset, _ = peel_densest(W, range(p), lam)
        idx = np.asarray(subset)
        greedy = W[np.ix_(idx, idx)].sum() / 2 / len(idx) ** lam
        best, _ = brute_force_best_subset(W, lam)
        above_oracle += greedy > best + 1e-12
        near += greedy >= 0.9 * best
    elapsed = time.perf_counter() - t0
    ok = above_oracle == 0 and near >= 95 and elapsed < 30
    report(4, ok, f"greedy above optimum in {above_oracle}/100, within 0.9x in {near}/100 "
                  f"({elapsed:.1f} s)")
    assert ok


def test_criterion_05_dependence_removal():
    sc = with_overrides(ScenarioSpec(), n=500, master_seed=2028)
    off = ~np.eye(sc.p, dtype=bool)
    ratios = []
    for rep in range(20):
        d = generate_dataset(sc, rep)
        res = run_coreg(d.Y, d.design)
        before = np.abs(np.cov(res.step1.residuals)[off]).mean()
        after = np.abs(np.cov(res.fit.residuals_eps)[off]).mean()
        ratios.append(after / before)
    ok = max(ratios) < 0.25
    report(5, ok, f"off-diagonal |Cov| ratio after/before: max {max(ratios):.3f}, "
                  f"mean {np.mean(ratios):.3f} over 20 replications (limit 0.25)")
    assert ok


@pytest.mark.slow
def test_criterion_06_method_ordering():
    sc = with_overrides(ScenarioSpec(), n=500, n_replications=100, master_seed=2026)
    agg = run_scenario(sc, ("coreg", "ols"))["aggregate"]
    c, o = agg["CoReg"], agg["OLS"]
    sens_ok = c["sensitivity"]["mean"] >= o["sensitivity"]["mean"] + 0.05
    auc_ok = c["auc"]["mean"] >= o["auc"]["mean"]
    fdr_ok = c["fdr"]["mean"] <= 0.10
    ok = sens_ok and auc_ok and fdr_ok
    report(6, ok, f"sensitivity CoReg {c['sensitivity']['mean']:.3f} vs OLS "
                  f"{o['sensitivity']['mean']:.3f} [{'ok' if sens_ok else 'fail'}]; "
                  f"AUC {c['auc']['mean']:.3f} vs {o['auc']['mean']:.3f} "
                  f"[{'ok' if auc_ok else 'fail'}]; FDR CoReg {c['fdr']['mean']:.3f} "
                  f"(limit 0.10) [{'ok' if fdr_ok else 'fail'}]")
    assert sens_ok, "sensitivity ordering"
    assert auc_ok, "AUC ordering"
    assert fdr_ok, "FDR bound"


@pytest.mark.slow
def test_criterion_07_replicability_ordering():
    base = ScenarioSpec(n=200, effect_size=0.3, n_replications=100)
    arm1 = with_overrides(base, master_seed=11, name="arm1")
    arm2 = with_overrides(base, master_seed=12, name="arm2",
                          sigma_spec=with_overrides(base.sigma_spec, noise_scale=1.0))
    summary = run_replicability(arm1, arm2, shared_truth_seed=7,
                                methods=("coreg", "ols"))["summary"]
    c = summary["CoReg"]["proportions"]["intersection"]
    o = summary["OLS"]["proportions"]["intersection"]
    ok = c >= o + 0.10
    report(7, ok, f"intersection proportion CoReg {c:.3f} vs OLS {o:.3f} (need +0.10)")
    assert ok


@pytest.mark.slow
def test_criterion_08_null_calibration():
    sc = with_overrides(ScenarioSpec(), effect_size=0.0, n_replications=100, master_seed=2027)
    agg = run_scenario(sc)["aggregate"]
    fpr = {m: 1.0 - a["specificity"]["mean"] for m, a in agg.items()}
    ok = max(fpr.values()) <= 0.08
    report(8, ok, "mean FPR " + ", ".join(f"{m} {v:.4f}" for m, v in fpr.items())
                  + " (limit 0.08)")
    assert ok


def test_criterion_09_bh_oracle():
    g = np.random.default_rng(909)
    mismatches = 0
    for i in range(1000):
        m = int(g.integers(1, 201))
        kind = i % 4
        if kind == 0:
            p = g.uniform(size=m)
        elif kind == 1:
            p = g.beta(0.3, 4.0, size=m)
        elif kind == 2:
            p = np.round(g.beta(0.5, 2.0, size=m), 2)  # heavy ties
        else:
            p = np.r_[g.uniform(0, 1e-3, size=m // 3), g.uniform(size=m - m // 3)]
        alpha = float(g.choice([0.01, 0.05, 0.1, 0.2]))
        _, rejected = bh_adjust(p, alpha)
        mismatches += rejected.tolist() != step_up_oracle(p.tolist(), alpha)
    ok = mismatches == 0
    report(9, ok, f"{mismatches} mismatches in 1000 random p-value vectors")
    assert ok


@pytest.mark.slow
def test_criterion_10_timing():
    res = timing_grid(n_replications=20)
    cells = res["n_grid"] + res["p_grid"]
    slowest = max(c["cell_seconds"] for c in cells)
    ok = res["slope_p"] < 2.0 and slowest < 60
    report(10, ok, f"log-log slope in p {res['slope_p']:.2f} (limit 2), in n "
                   f"{res['slope_n']:.2f}; slowest cell {slowest:.1f} s (limit 60)")
    assert ok


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
