"""Command-line interface: ``coreg {fit,network,simulate,replicability,bench}``.

Exit status: 0 success, 2 configuration or input error, 3 numerical/model failure.
"""
import argparse
import json
import os
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import ols_univariate, svd_factor_baseline
from .benchmark import N_GRID, P_GRID, timing_grid
from .exceptions import ConfigError, CoRegError, NoModulesError
from .factor import DEFAULT_LAMBDA_GRID, select_lambda
from .io import dumps_json, load_json, read_table, atomic_write, write_table
from .network import DEFAULT_THRESHOLD, ModulePartition, reorder_permutation
from .pipeline import run_coreg
from .plotting import render_heatmap, render_roc, render_venn_panel
from .regression import fit_ols, make_design, residual_dependence
from .simulation import METHODS, ScenarioSpec, run_replicability, run_scenario, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3
_SIM_KEYS = {"scenarios", "methods", "lambda_grid", "threshold"}


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _name_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="coreg", description=(
        "Multivariate regression with co-expression network factor adjustment."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", type=Path, default=Path("coreg_out"), help="output directory")
    common.add_argument("--alpha", type=float, help="BH level")
    common.add_argument("--lambda-grid", type=_float_list, help="comma-separated penalties in (1, 2]")
    common.add_argument("--methods", type=_name_list,
                        help=f"comma-separated subset of {sorted(METHODS)}")
    common.add_argument("--threads", type=int,
                        help="worker processes (default: $COREG_THREADS or 1)")
    common.add_argument("--seed", type=int, help="master seed override")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--preset", help="bundled configuration name (see README)")
    sim.add_argument("--replications", type=int, help="override the replication count")

    sub.add_parser("fit", parents=[common], help="fit CoReg to a CSV data file")
    sub.add_parser("network", parents=[common], help="residual co-expression modules only")
    sub.add_parser("simulate", parents=[common, sim], help="Monte Carlo method comparison")
    sub.add_parser("replicability", parents=[common, sim], help="two-study overlap experiment")
    bench = sub.add_parser("bench", parents=[common], help="runtime scaling grids")
    bench.add_argument("--replications", type=int, help="replications per cell (default 20)")
    return parser


def _threads(args):
    if args.threads is not None:
        value, source = args.threads, "--threads"
    elif os.environ.get("COREG_THREADS"):
        value, source = os.environ["COREG_THREADS"], "COREG_THREADS"
    else:
        return 1
    try:
        value = int(value)
    except ValueError:
        raise ConfigError(f"{source} must be an integer, got {value!r}") from None
    if value < 1:
        raise ConfigError(f"{source} must be >= 1")
    return value


def _check_grid(grid):
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigError("lambda grid is empty")
    bad = [g for g in grid if not 1.0 < g <= 2.0]
    if bad:
        raise ConfigError(f"lambda grid values must lie in (1, 2]; out of range: {bad}")
    return tuple(grid)


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _load_config(args, required=True):
    preset = getattr(args, "preset", None)
    if args.config and preset:
        raise ConfigError("use either --config or --preset, not both")
    if preset:
        name = preset if preset.endswith(".json") else preset + ".json"
        ref = resources.files("coreg.presets").joinpath(name)
        if not ref.is_file():
            names = sorted(p.name[:-5] for p in resources.files("coreg.presets").iterdir()
                           if p.name.endswith(".json"))
            raise ConfigError(f"unknown preset {preset!r}; available: {names}")
        return json.loads(ref.read_text()), None
    if args.config is None:
        if required:
            raise ConfigError("--config (or --preset) is required")
        return {}, None
    cfg = load_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{args.config}: top level must be a JSON object")
    return cfg, args.config.parent


def _methods(args, cfg, default):
    names = args.methods if args.methods is not None else cfg.get("methods", default)
    valid = set(METHODS) | {"svdfactor"}
    bad = [m for m in names if m.lower() not in valid]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}; valid methods: {sorted(METHODS)}")
    if not names:
        raise ConfigError("no methods selected")
    return [m.lower() for m in names]


def _model_options(args, cfg):
    grid = args.lambda_grid if args.lambda_grid is not None else cfg.get(
        "lambda_grid", DEFAULT_LAMBDA_GRID)
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha", 0.05)
    norm = cfg.get("norm", "spectral")
    if norm not in ("spectral", "frobenius"):
        raise ConfigError(f"norm must be 'spectral' or 'frobenius', got {norm!r}")
    loadings = cfg.get("loadings", "binary")
    if loadings not in ("binary", "eigen"):
        raise ConfigError(f"loadings must be 'binary' or 'eigen', got {loadings!r}")
    threshold = float(cfg.get("threshold", DEFAULT_THRESHOLD))
    if threshold < 0:
        raise ConfigError("threshold must be non-negative")
    return {"lambda_grid": _check_grid(grid), "alpha": _check_alpha(alpha),
            "threshold": threshold, "norm": norm, "loadings": loadings}


def _load_data(cfg, base):
    if "data" not in cfg:
        raise ConfigError("config needs a 'data' entry pointing at the CSV file")
    path = Path(cfg["data"])
    if base is not None and not path.is_absolute():
        path = base / path
    table = read_table(path)
    preds = cfg.get("predictors")
    if not isinstance(preds, list):
        raise ConfigError("config needs 'predictors': a list of column names")
    outcomes = cfg.get("outcomes") or [c for c in table.columns if c not in preds]
    overlap = sorted(set(preds) & set(outcomes))
    if overlap:
        raise ConfigError(f"columns listed as both predictor and outcome: {overlap}")
    if not outcomes:
        raise ConfigError("no outcome columns")
    Y = table.select(outcomes).T
    design = make_design(table.select(preds).T, preds, intercept=cfg.get("intercept", True))
    return Y, design, list(outcomes)


def _empty_partition(p):
    return ModulePartition((), tuple(range(p)), None, 0.0, p)


def _write_network(out, corr, partition, outcomes, factor_model):
    mod = partition.to_dict()
    mod["labels"] = outcomes
    atomic_write(out / "modules.json", dumps_json(mod))
    if factor_model is not None:
        atomic_write(out / "factor_model.json", dumps_json(factor_model.to_dict()))
    render_heatmap(corr, out / "heatmap_residual.svg", title="residual correlation")
    render_heatmap(corr, out / "heatmap_reordered.svg", reorder_permutation(partition),
                   title="residual correlation, reordered by module")


def cmd_fit(args):
    cfg, base = _load_config(args)
    opts = _model_options(args, cfg)
    methods = _methods(args, cfg, ["coreg"])
    Y, design, outcomes = _load_data(cfg, base)
    out = args.out
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = run_coreg(Y, design, opts["lambda_grid"], opts["alpha"], opts["threshold"],
                        opts["norm"], opts["loadings"], outcome_labels=outcomes)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    atomic_write(out / "inference.csv", res.inference.to_csv())
    summary = {"coreg": res.inference.summary(), "fallback": res.fallback, "K": res.K,
               "lambda_star": None if res.fallback else res.factor_model.lambda_star,
               "n_samples": design.n, "n_outcomes": len(outcomes),
               "predictors": list(design.predictor_names)}
    for key in methods:
        if key == "coreg":
            continue
        key = "svd" if key == "svdfactor" else key
        if key == "ols":
            other = ols_univariate(Y, design, opts["alpha"], outcomes)
        else:
            other = svd_factor_baseline(Y, design, res.K, opts["alpha"], outcomes)
        atomic_write(out / f"inference_{key}.csv", other.to_csv())
        summary[key] = other.summary()
    atomic_write(out / "summary.json", dumps_json(summary))
    partition = _empty_partition(len(outcomes)) if res.fallback else res.factor_model.partition
    _write_network(out, res.residual_corr, partition, outcomes, res.factor_model)
    rej = summary["coreg"]["rejections"]
    print(f"CoReg: K={res.K}, lambda*={summary['lambda_star']}, rejections {rej}")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_network(args):
    cfg, base = _load_config(args)
    opts = _model_options(args, cfg)
    Y, design, outcomes = _load_data(cfg, base)
    step1 = fit_ols(Y, design)
    cov, corr = residual_dependence(step1)
    try:
        model, lam = select_lambda(opts["lambda_grid"], cov, step1.residuals, opts["threshold"],
                                   opts["norm"], opts["loadings"],
                                   max_factors=design.n - design.q - 1)
        partition = model.partition
    except NoModulesError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        model, lam, partition = None, None, _empty_partition(len(outcomes))
    _write_network(args.out, corr, partition, outcomes, model)
    print(f"K={partition.K}, lambda*={lam}, module sizes {list(partition.module_sizes)}")
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def _scenario(d, args, seed_offset=0):
    if not isinstance(d, dict):
        raise ConfigError("each scenario must be a JSON object")
    try:
        sc = ScenarioSpec.from_dict(d)
    except TypeError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    seed = None if args.seed is None else args.seed + seed_offset
    return with_overrides(sc, master_seed=seed, n_replications=args.replications,
                          alpha=None if args.alpha is None else _check_alpha(args.alpha))


def _scenarios(cfg, args):
    if "scenarios" in cfg:
        unknown = set(cfg) - _SIM_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        items = cfg["scenarios"]
        if not isinstance(items, list) or not items:
            raise ConfigError("'scenarios' must be a non-empty list")
    else:
        items = [{k: v for k, v in cfg.items() if k not in _SIM_KEYS}]
    scenarios = [_scenario(d, args, i) for i, d in enumerate(items)]
    for i, sc in enumerate(scenarios):
        if not sc.name:
            scenarios[i] = with_overrides(sc, name=f"scenario{i + 1}")
    names = [sc.name for sc in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError(f"scenario names must be unique: {names}")
    return scenarios


def cmd_simulate(args):
    cfg, _ = _load_config(args)
    methods = _methods(args, cfg, list(METHODS))
    grid = _check_grid(args.lambda_grid if args.lambda_grid is not None
                       else cfg.get("lambda_grid", DEFAULT_LAMBDA_GRID))
    threshold = float(cfg.get("threshold", DEFAULT_THRESHOLD))
    scenarios = _scenarios(cfg, args)
    n_jobs = _threads(args)
    out = args.out
    cells, rep_rows, roc_rows = [], [], []
    for sc in scenarios:
        res = run_scenario(sc, methods, n_jobs=n_jobs, lambda_grid=grid, threshold=threshold)
        cells.append({"name": sc.name, "scenario": res["scenario"],
                      "aggregate": res["aggregate"], "n_failures": res["n_failures"],
                      "failures": res["failures"]})
        for row in res["rows"]:
            rep_rows.append([sc.name] + [row[c] for c in _REP_COLUMNS])
        curves = {}
        for method, pts in res["roc"].items():
            roc_rows.extend([sc.name, method, f, t] for f, t in pts)
            curves[method] = tuple(zip(*pts)) if pts else ((), ())
            render_roc({method: curves[method]}, out / f"roc_{sc.name}_{method}.svg",
                       title=f"{method}, {sc.name}")
        render_roc(curves, out / f"roc_{sc.name}.svg", title=sc.name)
        _print_cell(sc.name, res)
    report = {"methods": [METHODS[m if m != "svdfactor" else "svd"] for m in methods],
              "metrics": ["sensitivity", "specificity", "f1", "fdr", "auc"],
              "lambda_grid": list(grid), "threshold": threshold, "cells": cells}
    atomic_write(out / "aggregate.json", dumps_json(report))
    write_table(out / "replications.csv", ["scenario"] + list(_REP_COLUMNS), rep_rows)
    write_table(out / "roc.csv", ["scenario", "method", "fpr", "tpr"], roc_rows)
    print(f"artifacts written to {out}")
    return EXIT_OK


_REP_COLUMNS = ("replication", "method", "sensitivity", "specificity", "f1", "fdr", "auc",
                "tp", "fp", "fn", "tn", "K")


def _print_cell(name, res):
    print(f"[{name}]")
    print(f"  {'method':<10} {'sens':>6} {'spec':>6} {'F1':>6} {'FDR':>6} {'AUC':>6} {'sec':>7}")
    for method in res["methods"]:
        agg = res["aggregate"][method]
        secs = [t["seconds"] for t in res["timings"] if t["method"] == method]
        means = [agg[m]["mean"] for m in ("sensitivity", "specificity", "f1", "fdr", "auc")]
        vals = " ".join(f"{np.nan if v is None else v:6.3f}" for v in means)
        print(f"  {method:<10} {vals} {np.mean(secs) if secs else float('nan'):7.3f}")
    if res["n_failures"]:
        print(f"  {res['n_failures']} method failures recorded in aggregate.json")


def cmd_replicability(args):
    cfg, _ = _load_config(args)
    unknown = set(cfg) - {"arm1", "arm2", "shared_truth_seed", "methods", "lambda_grid",
                          "threshold"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "arm1" not in cfg or "arm2" not in cfg:
        raise ConfigError("replicability config needs 'arm1' and 'arm2' scenarios")
    methods = _methods(args, cfg, list(METHODS))
    grid = _check_grid(args.lambda_grid if args.lambda_grid is not None
                       else cfg.get("lambda_grid", DEFAULT_LAMBDA_GRID))
    threshold = float(cfg.get("threshold", DEFAULT_THRESHOLD))
    arm1 = _scenario(cfg["arm1"], args, 0)
    arm2 = _scenario(cfg["arm2"], args, 1)
    truth_seed = args.seed if args.seed is not None else cfg.get("shared_truth_seed")
    res = run_replicability(arm1, arm2, truth_seed, methods, n_jobs=_threads(args),
                            lambda_grid=grid, threshold=threshold)
    out = args.out
    rows = res.pop("rows")
    atomic_write(out / "replicability.json", dumps_json(res))
    cols = ["replication", "method", "tp_arm1", "tp_arm2", "only_arm1", "intersection",
            "only_arm2", "union"]
    write_table(out / "replicability_rows.csv", cols, ([r[c] for c in cols] for r in rows))
    render_venn_panel(res["summary"], out / "venn.svg")
    for method, s in res["summary"].items():
        pr = s["proportions"]
        print(f"{method:<10} only1 {s['only_arm1']:6.1f} ({pr['only_arm1']:.1%})  "
              f"both {s['intersection']:6.1f} ({pr['intersection']:.1%})  "
              f"only2 {s['only_arm2']:6.1f} ({pr['only_arm2']:.1%})")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_bench(args):
    cfg, _ = _load_config(args, required=False)
    unknown = set(cfg) - {"n_grid", "p_grid", "fixed_p", "fixed_n", "replications", "seed",
                          "lambda_grid", "threshold"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    reps = args.replications if args.replications is not None else cfg.get("replications", 20)
    if int(reps) < 1:
        raise ConfigError("replications must be >= 1")
    grid = _check_grid(args.lambda_grid if args.lambda_grid is not None
                       else cfg.get("lambda_grid", DEFAULT_LAMBDA_GRID))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)

    def progress(cell):
        print(f"p={cell['p']:5d} n={cell['n']:5d}  mean {cell['mean_seconds']:.4f} s  "
              f"cell {cell['cell_seconds']:.2f} s  K {cell['mean_K']:.1f}", flush=True)

    res = timing_grid(tuple(cfg.get("n_grid", N_GRID)), tuple(cfg.get("p_grid", P_GRID)),
                      int(cfg.get("fixed_p", 200)), int(cfg.get("fixed_n", 100)), int(reps),
                      int(seed), grid, float(cfg.get("threshold", DEFAULT_THRESHOLD)), progress)
    out = args.out
    atomic_write(out / "bench.json", dumps_json(res))
    cols = ["grid", "p", "n", "replications", "mean_seconds", "sd_seconds", "mean_K",
            "cell_seconds"]
    rows = [[g] + [c[k] for k in cols[1:]] for g in ("n_grid", "p_grid") for c in res[g]]
    write_table(out / "bench.csv", cols, rows)
    print(f"log-log slope vs n: {res.get('slope_n', float('nan')):.3f}, "
          f"vs p: {res.get('slope_p', float('nan')):.3f}")
    print(f"artifacts written to {out}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "network": cmd_network, "simulate": cmd_simulate,
            "replicability": cmd_replicability, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoRegError as exc:
        print(f"model failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
