"""Module-guided confirmatory factor model (Step 2 of CoReg).

Each extracted module becomes one factor. Loadings have non-overlapping
support: row ``j`` is nonzero only in the column of the module holding ``j``,
and singleton rows are zero.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .exceptions import ConfigError, DimensionError, NoModulesError
from .network import DEFAULT_THRESHOLD, build_graph, extract_modules
from .numerics import as_matrix, check_symmetric, sample_covariance, to_correlation

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "LoadingMatrix",
    "FactorModel",
    "build_loadings",
    "factor_scores",
    "factor_covariance",
    "block_factor_covariance",
    "reconstruct_covariance",
    "nuclear_norm",
    "spectral_norm",
    "fit_factor_model",
    "select_lambda",
]

DEFAULT_LAMBDA_GRID = tuple(round(1.1 + 0.1 * i, 1) for i in range(10))
SIGMA_U_FLOOR = 1e-8


@dataclass(frozen=True)
class LoadingMatrix:
    L: np.ndarray
    partition: object

    def __post_init__(self):
        L = self.L
        if L.ndim != 2 or L.shape[1] != self.partition.K:
            raise DimensionError("loading matrix needs one column per module")
        if np.any((L != 0).sum(axis=1) > 1):
            raise DimensionError("loading rows may have at most one nonzero entry")
        for k, m in enumerate(self.partition.modules):
            support = set(np.flatnonzero(L[:, k]).tolist())
            if support != set(m):
                raise DimensionError(f"support of column {k} does not match module {k}")

    @property
    def K(self):
        return self.L.shape[1]


@dataclass
class FactorModel:
    loadings: LoadingMatrix
    F: np.ndarray
    sigma_F: np.ndarray
    sigma_U_diag: np.ndarray
    lambda_star: float = None
    score_breakdown: list = field(default_factory=list)

    @property
    def K(self):
        return self.loadings.K

    @property
    def partition(self):
        return self.loadings.partition

    def to_dict(self):
        return {
            "lambda_star": self.lambda_star,
            "K": self.K,
            "module_sizes": self.partition.module_sizes,
            "sigma_F": self.sigma_F.tolist(),
            "score_breakdown": self.score_breakdown,
        }


def build_loadings(partition, p=None, kind="binary", sigma=None):
    """Loading matrix backed by ``partition``.

    ``kind="binary"`` gives 0/1 membership indicators. ``kind="eigen"`` puts the
    leading eigenvector of each module's block of ``sigma`` on its support
    (sign chosen so the entries sum to a non-negative value).
    """
    p = partition.n_nodes if p is None else int(p)
    if p != partition.n_nodes:
        raise DimensionError(f"partition covers {partition.n_nodes} nodes, p={p}")
    if partition.K == 0:
        raise NoModulesError("no modules extracted; fall back to mass-univariate OLS")
    L = np.zeros((p, partition.K))
    for k, m in enumerate(partition.modules):
        idx = list(m)
        if kind == "binary":
            L[idx, k] = 1.0
        elif kind == "eigen":
            if sigma is None:
                raise ConfigError("eigen loadings need the covariance matrix")
            w, V = np.linalg.eigh(np.asarray(sigma)[np.ix_(idx, idx)])
            v = V[:, -1]
            if v.sum() < 0:
                v = -v
            # Guard against exact zeros, which would shrink the support.
            v[v == 0] = np.finfo(float).eps
            L[idx, k] = v
        else:
            raise ConfigError(f"unknown loading kind {kind!r}")
    return LoadingMatrix(L, partition)


def _as_L(loadings):
    return loadings.L if isinstance(loadings, LoadingMatrix) else np.asarray(loadings, float)


def factor_scores(loadings, E):
    """``(L^T L)^{-1} L^T E``: per-sample module scores (K x n)."""
    L = _as_L(loadings)
    E = as_matrix(E, "E")
    if E.shape[0] != L.shape[0]:
        raise DimensionError(f"E has {E.shape[0]} rows, loadings have {L.shape[0]}")
    gram = L.T @ L
    if np.any(np.diag(gram) <= 0):
        raise DimensionError("a loading column is empty; L^T L is singular")
    return np.linalg.solve(gram, L.T @ E)


def factor_covariance(F):
    if F.shape[1] < 2:
        raise DimensionError("need at least 2 samples for the factor covariance")
    S = np.atleast_2d(sample_covariance(F))
    return S


def block_factor_covariance(R, partition):
    """Factor covariance read off a block-constant matrix: mean off-diagonal block entries."""
    R = check_symmetric(R, "R")
    K = partition.K
    out = np.empty((K, K))
    for a, ma in enumerate(partition.modules):
        for b, mb in enumerate(partition.modules):
            block = R[np.ix_(ma, mb)]
            if a == b:
                s = len(ma)
                out[a, b] = (block.sum() - np.trace(block)) / (s * (s - 1))
            else:
                out[a, b] = block.mean()
    return (out + out.T) / 2.0


def reconstruct_covariance(loadings, sigma_F):
    L = _as_L(loadings)
    sigma_F = np.atleast_2d(np.asarray(sigma_F, float))
    if sigma_F.shape != (L.shape[1], L.shape[1]):
        raise DimensionError(f"sigma_F must be {L.shape[1]}x{L.shape[1]}")
    M = L @ sigma_F @ L.T
    return (M + M.T) / 2.0


def nuclear_norm(loadings):
    # Disjoint column supports make the singular values the column norms.
    L = _as_L(loadings)
    return float(np.linalg.norm(L, axis=0).sum())


_DENSE_EIG_LIMIT = 400


def spectral_norm(M):
    """Largest absolute eigenvalue of a symmetric matrix."""
    p = M.shape[0]
    if p <= _DENSE_EIG_LIMIT:
        w = np.linalg.eigvalsh(M)
        return float(max(abs(w[0]), abs(w[-1])))
    v0 = np.random.default_rng(0).standard_normal(p)
    try:
        w = eigsh(M, k=1, which="LM", v0=v0, return_eigenvectors=False, tol=1e-10)
    except ArpackNoConvergence:
        w = np.linalg.eigvalsh(M)
    return float(np.abs(w).max())


def _reconstruction_error(residual, norm):
    if norm == "spectral":
        return spectral_norm(residual) ** 2
    if norm == "frobenius":
        return float(np.sum(residual ** 2))
    raise ConfigError(f"unknown norm {norm!r}; use 'spectral' or 'frobenius'")


def fit_factor_model(partition, sigma_hat, E, loadings="binary"):
    """Loadings, scores and covariances for one fixed partition."""
    L = build_loadings(partition, sigma_hat.shape[0], kind=loadings, sigma=sigma_hat)
    F = factor_scores(L, E)
    sigma_F = factor_covariance(F)
    recon = reconstruct_covariance(L, sigma_F)
    sigma_U = np.maximum(np.diag(sigma_hat) - np.diag(recon), SIGMA_U_FLOOR)
    return FactorModel(L, F, sigma_F, sigma_U, lambda_star=partition.lam)


def select_lambda(grid, sigma_hat, E, threshold=DEFAULT_THRESHOLD, norm="spectral",
                  loadings="binary", max_factors=None):
    """Pick the density penalty by reconstruction error plus loading nuclear norm.

    Every grid value is scored as ``||sigma_hat - L S_F L^T||^2 + ||L||_*``; the
    lowest score wins and exact ties go to the larger penalty. Partitions with
    more than ``max_factors`` modules are skipped (the augmented regression
    would have no residual degrees of freedom). Returns ``(FactorModel, lambda_star)``.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ConfigError("lambda grid is empty")
    for lam in grid:
        if not (1.0 < lam <= 2.0):
            raise ConfigError(f"lambda must lie in (1, 2], got {lam}")
    sigma_hat = check_symmetric(sigma_hat, "sigma_hat")
    E = as_matrix(E, "E")
    g = build_graph(to_correlation(sigma_hat))

    best, best_score, breakdown = None, np.inf, []
    seen, peel_cache = {}, {}
    for lam in grid:
        part = extract_modules(g, lam, threshold, peel_cache)
        entry = {"lambda": lam, "K": part.K, "module_sizes": part.module_sizes}
        if part.K == 0 or (max_factors is not None and part.K > max_factors):
            entry.update(reconstruction=None, nuclear=None, score=None)
            breakdown.append(entry)
            continue
        key = part.modules
        if key not in seen:
            model = fit_factor_model(part, sigma_hat, E, loadings)
            resid = sigma_hat - reconstruct_covariance(model.loadings, model.sigma_F)
            recon = _reconstruction_error(resid, norm)
            nuc = nuclear_norm(model.loadings)
            seen[key] = (model, recon, nuc)
        model, recon, nuc = seen[key]
        score = recon + nuc
        entry.update(reconstruction=recon, nuclear=nuc, score=score)
        breakdown.append(entry)
        if score <= best_score:
            best_score = score
            # Same modules can recur under several lambdas; rebind to this one.
            best = FactorModel(LoadingMatrix(model.loadings.L, part), model.F,
                               model.sigma_F, model.sigma_U_diag, lam)
    if best is None:
        raise NoModulesError("no lambda in the grid produced a usable module set; "
                             "fall back to OLS")
    best.score_breakdown = breakdown
    return best, best.lambda_star
