"""Co-expression network construction and dense-module extraction.

Modules are found one at a time by greedy peeling: repeatedly drop the node
with the smallest weighted degree and keep the intermediate node set with the
best penalized density ``|W(S)| / |S|**lam``. An accepted module is removed
from the graph and the search restarts on what is left.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DimensionError
from .numerics import check_symmetric

__all__ = [
    "WeightedGraph",
    "ModulePartition",
    "DEFAULT_THRESHOLD",
    "build_graph",
    "module_objective",
    "peeling_profile",
    "peel_densest",
    "extract_modules",
    "reorder_permutation",
]

DEFAULT_THRESHOLD = 0.05


@dataclass(frozen=True)
class WeightedGraph:
    weights: np.ndarray
    node_labels: tuple = ()

    @property
    def n_nodes(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class ModulePartition:
    """Disjoint modules plus the leftover singletons (0-based node indices)."""

    modules: tuple
    singletons: tuple
    lam: float
    objective_value: float = 0.0
    n_nodes: int = field(default=None)

    def __post_init__(self):
        modules = tuple(tuple(sorted(int(j) for j in m)) for m in self.modules)
        singletons = tuple(sorted(int(j) for j in self.singletons))
        object.__setattr__(self, "modules", modules)
        object.__setattr__(self, "singletons", singletons)
        seen = [j for m in modules for j in m] + list(singletons)
        n = self.n_nodes if self.n_nodes is not None else len(seen)
        object.__setattr__(self, "n_nodes", int(n))
        if any(len(m) < 2 for m in modules):
            raise ConfigError("every module needs at least two nodes")
        if len(seen) != len(set(seen)) or sorted(seen) != list(range(n)):
            raise ConfigError("modules and singletons must partition 0..n_nodes-1")

    @property
    def K(self):
        return len(self.modules)

    @property
    def module_sizes(self):
        return [len(m) for m in self.modules]

    def labels(self):
        """Module number per node (1..K), 0 for singletons."""
        out = np.zeros(self.n_nodes, dtype=int)
        for k, m in enumerate(self.modules, start=1):
            out[list(m)] = k
        return out

    def to_dict(self):
        return {
            "lambda": self.lam,
            "objective": self.objective_value,
            "modules": [list(m) for m in self.modules],
            "singletons": list(self.singletons),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        n = sum(len(m) for m in d["modules"]) + len(d["singletons"])
        lam = None if d.get("lambda") is None else float(d["lambda"])
        return cls(d["modules"], d["singletons"], lam,
                   float(d.get("objective", 0.0)), n)


def build_graph(R, node_labels=None):
    """Weighted graph with edge weights ``|R|`` and an empty diagonal."""
    R = check_symmetric(R, "R")
    if not np.allclose(np.diag(R), 1.0, atol=1e-8):
        raise ConfigError("correlation matrix must have a unit diagonal")
    if np.abs(R).max() > 1.0 + 1e-8:
        raise ConfigError("correlation entries must lie in [-1, 1]")
    W = np.minimum(np.abs(R), 1.0)
    np.fill_diagonal(W, 0.0)
    labels = tuple(node_labels) if node_labels is not None else tuple(range(W.shape[0]))
    return WeightedGraph(W, labels)


def _within_weight(W, nodes):
    idx = np.asarray(nodes, dtype=int)
    return float(W[np.ix_(idx, idx)].sum()) / 2.0


def module_objective(g, partition):
    """Sum over modules of within-module weight divided by ``size**lam``."""
    return float(sum(_within_weight(g.weights, m) / len(m) ** partition.lam
                     for m in partition.modules))


def _check_lambda(lam):
    if not (1.0 < lam <= 2.0):
        raise ConfigError(f"lambda must lie in (1, 2], got {lam}")


def peeling_profile(W, nodes):
    """Greedy peeling order over ``nodes``, independent of the penalty.

    Returns ``(idx, removed, totals)``: the sorted node array, the local
    positions in removal order, and the remaining within-set weight before each
    removal (``totals[i]`` belongs to the set of size ``len(idx) - i``, down to
    size 2). Ties in weighted degree go to the lowest node index.
    """
    idx = np.asarray(sorted(nodes), dtype=int)
    m = idx.size
    if m < 2:
        return idx, np.empty(0, dtype=int), np.empty(0)
    sub = W[np.ix_(idx, idx)]
    masked = sub.sum(axis=1)  # weighted degree, inf once removed
    total = masked.sum() / 2.0
    removed = np.empty(m - 2, dtype=int)
    totals = np.empty(m - 1)
    totals[0] = total
    for step in range(m - 2):
        v = int(np.argmin(masked))
        removed[step] = v
        total -= masked[v]
        masked -= sub[v]
        masked[v] = np.inf
        totals[step + 1] = total
    return idx, removed, totals


def _best_prefix(profile, lam):
    idx, removed, totals = profile
    if idx.size < 2:
        return [], -np.inf
    sizes = idx.size - np.arange(totals.size)
    ratios = totals / sizes.astype(float) ** lam
    j = int(np.argmax(ratios))  # first maximum: the larger set wins ties
    keep = np.ones(idx.size, dtype=bool)
    keep[removed[:j]] = False
    return idx[keep].tolist(), float(ratios[j])


def peel_densest(W, nodes, lam, cache=None):
    """One greedy peeling pass: the best set along the peeling order and its ratio.

    ``cache`` (a dict) shares peeling orders between calls on the same node set,
    e.g. across a grid of penalties.
    """
    key = frozenset(int(j) for j in nodes)
    if cache is not None and key in cache:
        profile = cache[key]
    else:
        profile = peeling_profile(W, key)
        if cache is not None:
            cache[key] = profile
    return _best_prefix(profile, lam)


def extract_modules(g, lam, threshold=DEFAULT_THRESHOLD, cache=None):
    """Sequentially peel off dense modules until none beats ``threshold``.

    Pass the same ``cache`` dict for several penalties on one graph to reuse
    peeling orders.
    """
    _check_lambda(lam)
    W = g.weights
    remaining = set(range(g.n_nodes))
    modules = []
    while len(remaining) >= 2:
        subset, ratio = peel_densest(W, remaining, lam, cache)
        if len(subset) < 2 or not ratio > threshold:
            break
        modules.append(subset)
        remaining.difference_update(subset)
    part = ModulePartition(tuple(modules), tuple(remaining), float(lam), 0.0, g.n_nodes)
    return ModulePartition(part.modules, part.singletons, part.lam,
                           module_objective(g, part), g.n_nodes)


def reorder_permutation(partition):
    """Node order listing module 1, module 2, ..., then singletons."""
    order = [j for m in partition.modules for j in m] + list(partition.singletons)
    return np.asarray(order, dtype=int)
