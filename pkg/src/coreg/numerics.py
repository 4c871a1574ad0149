"""Dense matrix primitives shared by the rest of the package.

Matrices follow the variables x samples layout used throughout the model
code (``Y`` is p x n). Public estimators in :mod:`coreg.estimators` accept the
usual samples x features layout and transpose on the way in.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import DecompositionError, DegenerateVarianceError, DimensionError

__all__ = [
    "RngStream",
    "as_matrix",
    "check_symmetric",
    "sample_covariance",
    "to_correlation",
    "nearest_psd_correlation",
    "covariance_root",
    "mvn_sample",
]


@dataclass(frozen=True)
class RngStream:
    """Splittable random stream.

    Equal ``(master_seed, stream_index)`` pairs yield identical draws; distinct
    indices yield independent ones, so replication ``r`` can run anywhere.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self, *subkeys):
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_index),) + tuple(int(k) for k in subkeys),
        )
        return np.random.Generator(np.random.PCG64(seq))


def as_matrix(values, name="matrix"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise DimensionError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def check_symmetric(values, name="matrix", atol=1e-10):
    arr = as_matrix(values, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.abs(arr).max()))
    if not np.allclose(arr, arr.T, rtol=0.0, atol=atol * scale):
        raise DimensionError(f"{name} is not symmetric")
    return (arr + arr.T) / 2.0


def sample_covariance(E):
    """Row covariance of a variables x samples matrix, divisor ``n - 1``."""
    E = as_matrix(E, "E")
    n = E.shape[1]
    if n < 2:
        raise DimensionError(f"need at least 2 samples, got {n}")
    centered = E - E.mean(axis=1, keepdims=True)
    S = centered @ centered.T / (n - 1)
    return (S + S.T) / 2.0


def to_correlation(S):
    """Rescale a covariance matrix to unit diagonal."""
    S = check_symmetric(S, "S")
    d = np.diag(S)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise DegenerateVarianceError(int(bad[0]), float(d[bad[0]]))
    scale = 1.0 / np.sqrt(d)
    R = S * scale[:, None] * scale[None, :]
    R = (R + R.T) / 2.0
    np.fill_diagonal(R, 1.0)
    return np.clip(R, -1.0, 1.0)


def nearest_psd_correlation(R, tol=1e-12):
    """Clip negative eigenvalues to zero and restore the unit diagonal.

    Inputs that are already PSD (smallest eigenvalue >= ``-tol``) are returned
    unchanged.
    """
    R = check_symmetric(R, "R")
    for _ in range(5):
        w, V = np.linalg.eigh(R)
        if w[0] >= -tol:
            return R
        A = (V * np.clip(w, 0.0, None)) @ V.T
        d = np.sqrt(np.clip(np.diag(A), 1e-300, None))
        A = A / d[:, None] / d[None, :]
        R = (A + A.T) / 2.0
        np.fill_diagonal(R, 1.0)
    return R


def covariance_root(sigma):
    """Eigendecomposition square root ``A`` with ``A @ A.T == sigma``."""
    sigma = check_symmetric(sigma, "sigma")
    w, V = np.linalg.eigh(sigma)
    if w[0] < -1e-8:
        raise DecompositionError(f"sigma is not PSD (min eigenvalue {w[0]:.3e})")
    return V * np.sqrt(np.clip(w, 0.0, None))


def mvn_sample(mean, sigma, n, rng, root=None):
    """Draw ``n`` samples from MVN(mean, sigma) as a variables x samples matrix.

    Uses an eigendecomposition square root so singular PSD ``sigma`` is fine;
    pass a precomputed ``root`` to skip it. ``rng`` is an :class:`RngStream`
    or a ``numpy.random.Generator``.
    """
    if root is None:
        root = covariance_root(sigma)
    mean = np.asarray(mean, dtype=float).reshape(-1)
    p = root.shape[0]
    if mean.shape[0] != p:
        raise DimensionError(f"mean has length {mean.shape[0]}, sigma is {p}x{p}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    Z = gen.standard_normal((p, int(n)))
    return mean[:, None] + root @ Z
