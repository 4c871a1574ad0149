"""Block-covariance simulation, metrics and the replication harnesses."""
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import auc as _trapezoid_auc

from .baselines import ols_univariate, svd_factor_baseline
from .exceptions import ConfigError
from .factor import DEFAULT_LAMBDA_GRID
from .network import DEFAULT_THRESHOLD
from .numerics import RngStream, mvn_sample, nearest_psd_correlation
from .pipeline import run_coreg
from .regression import make_design

__all__ = [
    "BlockSigmaSpec",
    "ScenarioSpec",
    "GroundTruth",
    "SimulatedDataset",
    "MetricsSummary",
    "METHODS",
    "METRICS",
    "DEFAULT_SIGMA",
    "generate_block_sigma",
    "generate_dataset",
    "allocate_signals",
    "evaluate",
    "roc_points",
    "run_methods",
    "run_scenario",
    "run_replicability",
    "with_overrides",
]

MAX_BLOCK_DISTORTION = 0.15
METRICS = ("sensitivity", "specificity", "f1", "fdr", "auc")
METHODS = {"coreg": "CoReg", "ols": "OLS", "svd": "SvdFactor"}
_METHOD_ALIASES = {"coreg": "coreg", "ols": "ols", "svd": "svd", "svdfactor": "svd"}
# Sub-stream keys under one RngStream.
_SIGMA, _SIGNALS, _PREDICTORS, _NOISE = range(4)


@dataclass(frozen=True)
class BlockSigmaSpec:
    block_sizes: tuple = (100, 100, 100)
    block_mean_corr: tuple = (0.8, 0.6, 0.4)
    within_block_sd: float = 0.05
    inter_block: tuple = ((0, 1, -0.4),)
    n_singleton_vars: int = 200
    noise_scale: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        object.__setattr__(self, "block_mean_corr", tuple(float(c) for c in self.block_mean_corr))
        object.__setattr__(self, "inter_block",
                           tuple((int(i), int(j), float(c)) for i, j, c in self.inter_block))
        if len(self.block_sizes) != len(self.block_mean_corr):
            raise ConfigError("block_sizes and block_mean_corr differ in length")
        if any(s < 1 for s in self.block_sizes) or self.n_singleton_vars < 0:
            raise ConfigError("block sizes must be positive, singleton count non-negative")
        corrs = list(self.block_mean_corr) + [c for _, _, c in self.inter_block]
        if any(not -1.0 < c < 1.0 for c in corrs):
            raise ConfigError("target correlations must lie in (-1, 1)")
        for i, j, _ in self.inter_block:
            if not (0 <= i < len(self.block_sizes) and 0 <= j < len(self.block_sizes)) or i == j:
                raise ConfigError(f"inter_block pair ({i}, {j}) does not name two blocks")
        if self.within_block_sd < 0 or self.noise_scale <= 0:
            raise ConfigError("within_block_sd must be >= 0 and noise_scale > 0")

    @property
    def p(self):
        return sum(self.block_sizes) + self.n_singleton_vars

    def block_slices(self):
        out, start = [], 0
        for s in self.block_sizes:
            out.append(slice(start, start + s))
            start += s
        return out

    def to_dict(self):
        d = asdict(self)
        d["inter_block"] = [list(t) for t in self.inter_block]
        d["block_sizes"] = list(self.block_sizes)
        d["block_mean_corr"] = list(self.block_mean_corr)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown sigma_spec fields: {sorted(unknown)}")
        return cls(**d)


DEFAULT_SIGMA = BlockSigmaSpec()


@dataclass(frozen=True)
class ScenarioSpec:
    sigma_spec: BlockSigmaSpec = DEFAULT_SIGMA
    n: int = 200
    q: int = 2
    n_true_signals: int = 100
    effect_size: float = 0.3
    n_replications: int = 100
    alpha: float = 0.05
    master_seed: int = 0
    predictor_sd: float = 0.38
    name: str = ""

    def __post_init__(self):
        if isinstance(self.sigma_spec, dict):
            object.__setattr__(self, "sigma_spec", BlockSigmaSpec.from_dict(self.sigma_spec))
        if not 0 <= self.n_true_signals <= self.sigma_spec.p:
            raise ConfigError("n_true_signals must lie between 0 and p")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.q < 2:
            raise ConfigError("q counts the intercept plus at least one predictor (q >= 2)")
        if self.n <= self.q + 1:
            raise ConfigError("n must exceed q + 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.predictor_sd <= 0:
            raise ConfigError("predictor_sd must be positive")

    @property
    def p(self):
        return self.sigma_spec.p

    def to_dict(self):
        d = asdict(self)
        d["sigma_spec"] = self.sigma_spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        if "sigma_spec" in d:
            d["sigma_spec"] = BlockSigmaSpec.from_dict(d["sigma_spec"])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    signal_indices: frozenset
    p: int

    def mask(self):
        m = np.zeros(self.p, dtype=bool)
        m[sorted(self.signal_indices)] = True
        return m


@dataclass
class SimulatedDataset:
    Y: np.ndarray
    design: object
    truth: GroundTruth
    sigma: np.ndarray = field(repr=False)


def _target_correlation(spec, gen):
    p = spec.p
    R = np.eye(p)
    slices = spec.block_slices()
    for sl, mean in zip(slices, spec.block_mean_corr):
        s = sl.stop - sl.start
        draws = gen.normal(mean, spec.within_block_sd, size=(s, s)) if spec.within_block_sd > 0 \
            else np.full((s, s), mean)
        upper = np.triu(np.clip(draws, -0.99, 0.99), 1)
        block = upper + upper.T
        np.fill_diagonal(block, 1.0)
        R[sl, sl] = block
    for i, j, c in spec.inter_block:
        R[slices[i], slices[j]] = c
        R[slices[j], slices[i]] = c
    return R


def _block_means(R, spec):
    slices = spec.block_slices()
    out = []
    for a, sa in enumerate(slices):
        for b, sb in enumerate(slices[a:], start=a):
            blk = R[sa, sb]
            if a == b:
                s = sa.stop - sa.start
                out.append((blk.sum() - s) / (s * (s - 1)) if s > 1 else 0.0)
            else:
                out.append(blk.mean())
    return np.asarray(out)


def generate_block_sigma(spec, rng):
    """Interconnected block covariance ``noise_scale * R``.

    Within-block correlations are drawn around each block mean, clamped to
    [-0.99, 0.99]; inter-block entries are constants; the result is repaired
    to PSD. A repair that moves any block's mean correlation by more than
    0.15 is rejected.
    """
    gen = rng.generator(_SIGMA) if isinstance(rng, RngStream) else rng
    target = _target_correlation(spec, gen)
    R = nearest_psd_correlation(target)
    shift = np.abs(_block_means(R, spec) - _block_means(target, spec))
    if shift.size and shift.max() > MAX_BLOCK_DISTORTION:
        raise ConfigError(f"PSD repair moved a block mean by {shift.max():.3f} "
                          f"(limit {MAX_BLOCK_DISTORTION}); the block spec is not realisable")
    return spec.noise_scale * R


def allocate_signals(spec, n_signals):
    """Signal counts per group (blocks, then singletons), proportional to size."""
    sizes = list(spec.block_sizes) + [spec.n_singleton_vars]
    p = sum(sizes)
    raw = [n_signals * s / p for s in sizes]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(sizes)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n_signals - sum(counts)]:
        counts[i] += 1
    return counts


def _signal_indices(spec, n_signals, gen):
    counts = allocate_signals(spec, n_signals)
    starts = np.cumsum([0] + list(spec.block_sizes) + [spec.n_singleton_vars])
    chosen = []
    for g, c in enumerate(counts):
        size = starts[g + 1] - starts[g]
        if c:
            chosen.extend((starts[g] + gen.choice(size, size=c, replace=False)).tolist())
    return frozenset(int(i) for i in chosen)


def generate_dataset(scenario, replication, truth_seed=None, sigma=None, root=None):
    """One simulated study: ``Y ~ MVN(B X_i, Sigma)`` with an intercept plus normal predictors.

    The covariance draw and signal placement come from ``truth_seed`` (defaults
    to the scenario seed), so two scenarios sharing it share ground truth.
    Predictors and noise always come from the scenario's own seed. A fixed
    ``sigma`` (and optionally its square ``root``) skips the covariance draw.
    """
    spec = scenario.sigma_spec
    truth_stream = RngStream(scenario.master_seed if truth_seed is None else truth_seed,
                             replication)
    data_stream = RngStream(scenario.master_seed, replication)
    if sigma is None:
        sigma = generate_block_sigma(spec, truth_stream.generator(_SIGMA))
        root = None
    signals = _signal_indices(spec, scenario.n_true_signals, truth_stream.generator(_SIGNALS))
    if scenario.effect_size == 0:
        signals = frozenset()

    gen = data_stream.generator(_PREDICTORS)
    preds = gen.normal(0.0, scenario.predictor_sd, size=(scenario.q - 1, scenario.n))
    design = make_design(preds, [f"x{i + 1}" for i in range(scenario.q - 1)])
    B = np.zeros((spec.p, scenario.q))
    B[sorted(signals), 1] = scenario.effect_size
    Y = B @ design.X + mvn_sample(np.zeros(spec.p), sigma, scenario.n,
                                  data_stream.generator(_NOISE), root=root)
    return SimulatedDataset(Y, design, GroundTruth(signals, spec.p), sigma)


@dataclass
class MetricsSummary:
    sensitivity: float
    specificity: float
    f1: float
    fdr: float
    auc: float
    roc_points: list = field(repr=False, default_factory=list)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def as_row(self):
        return {m: getattr(self, m) for m in METRICS + ("tp", "fp", "fn", "tn")}


def roc_points(p_values, truth_mask):
    """ROC over p-value cut-offs, from (0, 0) to (1, 1); tied p-values move together."""
    p = np.asarray(p_values, dtype=float)
    y = np.asarray(truth_mask, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    order = np.argsort(p, kind="mergesort")
    p_sorted, y_sorted = p[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    last = np.r_[np.flatnonzero(np.diff(p_sorted) != 0), p.size - 1]
    tpr = tp[last] / n_pos if n_pos else np.zeros(last.size)
    fpr = fp[last] / n_neg if n_neg else np.zeros(last.size)
    pts = [(0.0, 0.0)] + list(zip(fpr.tolist(), tpr.tolist()))
    if pts[-1] != (1.0, 1.0):
        pts.append((1.0, 1.0))
    return pts


def evaluate(result, truth, predictor=1):
    """Confusion metrics and ROC for one predictor column of an inference result."""
    col = result.column(predictor)
    truth_mask = truth.mask() if isinstance(truth, GroundTruth) else np.asarray(truth, bool)
    rejected = np.asarray(result.rejected[:, col], dtype=bool)
    if rejected.shape != truth_mask.shape:
        raise ConfigError("result and ground truth cover different outcomes")
    tp = int(np.sum(rejected & truth_mask))
    fp = int(np.sum(rejected & ~truth_mask))
    fn = int(np.sum(~rejected & truth_mask))
    tn = int(np.sum(~rejected & ~truth_mask))
    sens = tp / (tp + fn) if tp + fn else math.nan
    spec = tn / (tn + fp) if tn + fp else math.nan
    f1 = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else math.nan
    fdr = fp / max(tp + fp, 1)
    pts = roc_points(result.p_value[:, col], truth_mask)
    if tp + fn and tn + fp:
        fpr, tpr = zip(*pts)
        area = float(_trapezoid_auc(fpr, tpr))
    else:
        area = math.nan
    return MetricsSummary(sens, spec, f1, fdr, area, pts, tp, fp, fn, tn)


def _canonical_methods(methods):
    out = []
    for m in methods:
        key = _METHOD_ALIASES.get(str(m).lower())
        if key is None:
            raise ConfigError(f"unknown method {m!r}; valid methods: {', '.join(METHODS)}")
        if key not in out:
            out.append(key)
    return out


def run_methods(dataset, methods, alpha=0.05, lambda_grid=DEFAULT_LAMBDA_GRID,
                threshold=DEFAULT_THRESHOLD, svd_factors=None):
    """Fit each method on one dataset.

    Returns ``{key: (InferenceResult, seconds, extras)}``. The SVD surrogate uses
    CoReg's selected factor count unless ``svd_factors`` is given.
    """
    methods = _canonical_methods(methods)
    out = {}
    k_coreg = None
    if "coreg" in methods or ("svd" in methods and svd_factors is None):
        t0 = time.perf_counter()
        res = run_coreg(dataset.Y, dataset.design, lambda_grid, alpha, threshold)
        elapsed = time.perf_counter() - t0
        k_coreg = res.K
        extras = {"K": res.K, "lambda": None if res.factor_model is None
                  else res.factor_model.lambda_star, "fallback": res.fallback}
        if "coreg" in methods:
            out["coreg"] = (res.inference, elapsed, extras)
    if "ols" in methods:
        t0 = time.perf_counter()
        r = ols_univariate(dataset.Y, dataset.design, alpha)
        out["ols"] = (r, time.perf_counter() - t0, {})
    if "svd" in methods:
        k = svd_factors if svd_factors is not None else k_coreg
        t0 = time.perf_counter()
        r = svd_factor_baseline(dataset.Y, dataset.design, k, alpha)
        out["svd"] = (r, time.perf_counter() - t0, {"K": k})
    return {m: out[m] for m in methods}


def _one_replication(scenario, rep, methods, lambda_grid, threshold):
    rows, timings, rocs, failures = [], [], {}, []
    try:
        data = generate_dataset(scenario, rep)
        fitted = run_methods(data, methods, scenario.alpha, lambda_grid, threshold)
    except Exception as exc:  # recorded and skipped, per replication
        return rows, timings, rocs, [(rep, "all", repr(exc))]
    for key, (res, secs, extras) in fitted.items():
        m = evaluate(res, data.truth)
        row = {"scenario": scenario.name, "replication": rep, "method": METHODS[key]}
        row.update(m.as_row())
        row["K"] = extras.get("K")
        rows.append(row)
        timings.append({"scenario": scenario.name, "replication": rep,
                        "method": METHODS[key], "seconds": secs})
        rocs[METHODS[key]] = m.roc_points
    return rows, timings, rocs, failures


_ROC_GRID = np.linspace(0.0, 1.0, 101)


def _mean_roc(curves):
    if not curves:
        return []
    tprs = []
    for pts in curves:
        fpr, tpr = np.asarray(pts).T
        # Step interpolation at the upper envelope of each fpr value.
        tprs.append(np.interp(_ROC_GRID, fpr, tpr))
    mean = np.mean(tprs, axis=0)
    return list(zip(_ROC_GRID.tolist(), np.maximum.accumulate(mean).tolist()))


def _aggregate(rows, names):
    agg = {}
    for name in names:
        sel = [r for r in rows if r["method"] == name]
        entry = {"n_replications": len(sel)}
        for metric in METRICS:
            vals = np.array([r[metric] for r in sel], dtype=float)
            ok = vals[~np.isnan(vals)]
            entry[metric] = {
                "mean": float(ok.mean()) if ok.size else None,
                "sd": float(ok.std(ddof=1)) if ok.size > 1 else None,
                "n_nan": int(np.isnan(vals).sum()),
            }
        agg[name] = entry
    return agg


def run_scenario(scenario, methods=("coreg", "ols", "svd"), n_jobs=1,
                 lambda_grid=DEFAULT_LAMBDA_GRID, threshold=DEFAULT_THRESHOLD):
    """Run every method over all replications of ``scenario``.

    Returns a dict with ``aggregate`` (per-method mean/sd of each metric),
    ``rows`` (per replication), ``timings``, ``roc`` (vertically averaged
    curves) and ``failures``. Everything except ``timings`` is deterministic
    in the scenario seed.
    """
    keys = _canonical_methods(methods)
    names = [METHODS[k] for k in keys]
    reps = range(scenario.n_replications)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_one_replication)(scenario, r, keys, lambda_grid, threshold) for r in reps)
    rows, timings, failures = [], [], []
    curves = {name: [] for name in names}
    for r_rows, r_time, r_roc, r_fail in parts:
        rows.extend(r_rows)
        timings.extend(r_time)
        failures.extend(r_fail)
        for name, pts in r_roc.items():
            curves[name].append(pts)
    return {
        "scenario": scenario.to_dict(),
        "methods": names,
        "aggregate": _aggregate(rows, names),
        "rows": rows,
        "timings": timings,
        "roc": {name: _mean_roc(c) for name, c in curves.items()},
        "failures": [{"replication": r, "method": m, "error": e} for r, m, e in failures],
        "n_failures": len(failures),
    }


def _replicability_replication(spec1, spec2, shared_truth_seed, rep, keys, lambda_grid,
                               threshold):
    d1 = generate_dataset(spec1, rep, truth_seed=shared_truth_seed)
    d2 = generate_dataset(spec2, rep, truth_seed=shared_truth_seed)
    f1 = run_methods(d1, keys, spec1.alpha, lambda_grid, threshold)
    f2 = run_methods(d2, keys, spec2.alpha, lambda_grid, threshold)
    truth = d1.truth.mask()
    rows = []
    for key in keys:
        tp1 = set(np.flatnonzero(f1[key][0].rejected[:, 1] & truth).tolist())
        tp2 = set(np.flatnonzero(f2[key][0].rejected[:, 1] & truth).tolist())
        rows.append({"replication": rep, "method": METHODS[key],
                     "tp_arm1": len(tp1), "tp_arm2": len(tp2),
                     "only_arm1": len(tp1 - tp2), "intersection": len(tp1 & tp2),
                     "only_arm2": len(tp2 - tp1), "union": len(tp1 | tp2)})
    return rows


def run_replicability(spec1, spec2, shared_truth_seed=None, methods=("coreg", "ols", "svd"),
                      n_jobs=1, lambda_grid=DEFAULT_LAMBDA_GRID, threshold=DEFAULT_THRESHOLD):
    """Two-laboratory experiment: overlap of true positives between two studies.

    Both arms share the correlation structure and signal locations (drawn from
    ``shared_truth_seed``); predictors and noise are independent per arm.
    Proportions are each Venn section's mean count over the mean union.
    """
    if spec1.p != spec2.p or spec1.n_true_signals != spec2.n_true_signals:
        raise ConfigError("replicability arms must share p and the number of true signals")
    if spec1.sigma_spec.block_sizes != spec2.sigma_spec.block_sizes:
        raise ConfigError("replicability arms must share the block layout")
    if spec1.n_replications != spec2.n_replications:
        raise ConfigError("replicability arms must use the same number of replications")
    if shared_truth_seed is None:
        shared_truth_seed = spec1.master_seed
    keys = _canonical_methods(methods)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_replicability_replication)(spec1, spec2, shared_truth_seed, r, keys,
                                            lambda_grid, threshold)
        for r in range(spec1.n_replications))
    rows = [row for part in parts for row in part]
    summary = {}
    for key in keys:
        name = METHODS[key]
        sel = [r for r in rows if r["method"] == name]
        means = {c: float(np.mean([r[c] for r in sel]))
                 for c in ("only_arm1", "intersection", "only_arm2", "union", "tp_arm1", "tp_arm2")}
        u = means["union"]
        means["proportions"] = {c: (means[c] / u if u > 0 else 0.0)
                                for c in ("only_arm1", "intersection", "only_arm2")}
        summary[name] = means
    return {
        "arm1": spec1.to_dict(),
        "arm2": spec2.to_dict(),
        "shared_truth_seed": shared_truth_seed,
        "methods": [METHODS[k] for k in keys],
        "summary": summary,
        "rows": rows,
    }


def with_overrides(scenario, **kwargs):
    return replace(scenario, **{k: v for k, v in kwargs.items() if v is not None})
