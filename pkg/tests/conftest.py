import itertools

import numpy as np
import pytest


def block_correlation(sizes, within, cross=0.0, inter=None):
    """Exact block-constant correlation matrix with unit diagonal."""
    p = sum(sizes)
    R = np.full((p, p), float(cross))
    starts = np.cumsum([0] + list(sizes))
    for k, c in enumerate(within):
        R[starts[k]:starts[k + 1], starts[k]:starts[k + 1]] = c
    for (a, b), c in (inter or {}).items():
        R[starts[a]:starts[a + 1], starts[b]:starts[b + 1]] = c
        R[starts[b]:starts[b + 1], starts[a]:starts[a + 1]] = c
    np.fill_diagonal(R, 1.0)
    return R


def brute_force_best_subset(W, lam):
    """Best |W(S)| / |S|**lam over every subset of size >= 2."""
    p = W.shape[0]
    best, best_set = -np.inf, None
    for size in range(2, p + 1):
        for S in itertools.combinations(range(p), size):
            idx = np.asarray(S)
            val = W[np.ix_(idx, idx)].sum() / 2.0 / size ** lam
            if val > best:
                best, best_set = val, S
    return best, best_set


def step_up_oracle(p, alpha):
    """Literal BH: largest k with p_(k) <= k alpha / m, reject the k smallest."""
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    k_star = 0
    for k in range(1, m + 1):
        if p[order[k - 1]] <= k * alpha / m:
            k_star = k
    rejected = [False] * m
    for i in order[:k_star]:
        rejected[i] = True
    # Tied p-values at the cut are rejected together.
    if k_star:
        cut = p[order[k_star - 1]]
        rejected = [r or p[i] <= cut for i, r in enumerate(rejected)]
    return rejected


def random_weight_graph(rng, p):
    W = rng.uniform(0.0, 1.0, size=(p, p)) ** 2
    W = np.triu(W, 1)
    return W + W.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
