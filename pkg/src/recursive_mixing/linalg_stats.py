"""Dense linear algebra, seeded random streams and moment estimators.

Everything here works in float64. Matrices are small (p <= 16), so plain
numpy is used throughout; the only decompositions are Cholesky and, as a
fallback for covariance iterates that lost definiteness, a symmetric
eigendecomposition with negative eigenvalues clamped to zero.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptySample, NotPsd, TooFewSamples

__all__ = [
    "RngStream",
    "cholesky",
    "psd_factor",
    "batch_psd_factor",
    "sample_mvn",
    "sample_mean",
    "sample_cov",
    "trace",
    "trace_of_square",
    "frob_sq_dist",
    "l2_sq_dist",
]

# Mixed into every stream's entropy so streams of this package never collide
# with a user's bare ``SeedSequence(seed)``.
_STREAM_SALT = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    The key goes through :class:`numpy.random.SeedSequence`, whose spawn
    keys give a splittable hash: distinct ``stream_id`` values (and distinct
    :meth:`substream` indices) yield independent PCG64 streams, and equal
    keys give bitwise-identical draws.

    A stream is stateful, so hand each replication its own instance.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self.gen = self._make((self.stream_id,))

    def _make(self, key):
        ss = np.random.SeedSequence(entropy=[self.seed, _STREAM_SALT], spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> np.random.Generator:
        """Fresh generator for a named sub-purpose of this stream."""
        return self._make((self.stream_id, int(index)))

    def standard_normal(self, size):
        return self.gen.standard_normal(size)

    def random(self, size=None):
        return self.gen.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Semi-definite input is accepted: a pivot in ``[-1e-10, 0]`` (scaled by
    the largest diagonal entry) is treated as an exact zero and its column
    is zeroed. Anything more negative raises :class:`NotPsd`.
    """
    a = _as_square(a)
    p = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(a))))) if p else 1.0
    tol = 1e-10 * scale
    L = np.zeros_like(a)
    for j in range(p):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol:
            raise NotPsd(f"pivot {j} is {d:.3e}")
        if d <= tol:
            # zero pivot: the rest of the column must vanish too
            rest = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if np.any(np.abs(rest) > np.sqrt(tol) * np.sqrt(scale)):
                raise NotPsd(f"pivot {j} is zero but its column is not")
            continue
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def psd_factor(a) -> tuple[np.ndarray, bool]:
    """Factor ``F`` with ``F @ F.T == a`` for sampling.

    Tries Cholesky first. If it fails, negative eigenvalues are clamped to
    zero and ``V sqrt(max(lam, 0))`` is returned together with ``True``.
    """
    a = _as_square(a)
    try:
        return np.linalg.cholesky(a), False
    except np.linalg.LinAlgError:
        pass
    sym = 0.5 * (a + a.T)
    lam, vec = np.linalg.eigh(sym)
    return vec * np.sqrt(np.clip(lam, 0.0, None)), True


def batch_psd_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """:func:`psd_factor` over a stack ``(R, p, p)``; returns factors and clamp flags."""
    try:
        return np.linalg.cholesky(a), np.zeros(a.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(a)
    clamped = np.zeros(a.shape[0], dtype=bool)
    for r in range(a.shape[0]):
        if not np.all(np.isfinite(a[r])):
            out[r] = np.nan
            clamped[r] = True
            continue
        out[r], clamped[r] = psd_factor(a[r])
    return out, clamped


def sample_mvn(mean, chol, count: int, rng: RngStream) -> np.ndarray:
    """``count`` draws ``mean + chol @ z`` with ``z`` standard normal, shape ``(count, p)``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    chol = np.atleast_2d(np.asarray(chol, dtype=float))
    p = mean.shape[0]
    if chol.shape != (p, p):
        raise DimensionMismatch(f"factor shape {chol.shape} does not match mean of length {p}")
    if count < 1:
        raise ValueError("count must be positive")
    z = rng.standard_normal((count, p))
    return mean + z @ chol.T


def sample_mean(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.shape[0] == 0:
        raise EmptySample("mean of an empty sample")
    return xs.mean(axis=0)


def sample_cov(xs, center=None) -> np.ndarray:
    """Unbiased covariance with denominator ``n - 1``.

    ``center`` defaults to the sample mean. The result is symmetrised so it
    is exactly symmetric.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    n = xs.shape[0]
    if n < 2:
        raise TooFewSamples(f"covariance needs n >= 2, got {n}")
    center = sample_mean(xs) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape[0] != xs.shape[1]:
        raise DimensionMismatch("center does not match sample dimension")
    d = xs - center
    s = d.T @ d / (n - 1)
    return 0.5 * (s + s.T)


def trace(a) -> float:
    return float(np.trace(_as_square(a)))


def trace_of_square(a) -> float:
    """``tr(A @ A)`` without forming the product."""
    a = _as_square(a)
    return float(np.sum(a * a.T))


def frob_sq_dist(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


def l2_sq_dist(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    return float(np.sum((u - v) ** 2))
