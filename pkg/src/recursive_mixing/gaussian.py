"""Recursive weighted estimation of a multivariate Gaussian.

Each step mixes the sample mean/covariance of ``n`` fresh real draws with
those of ``m`` synthetic draws from the previous fit:

    mu_t    = w * mean(real) + (1 - w) * mean(synth)
    Sigma_t = w * S_real     + (1 - w) * S_synth

Step 0 fits on real data alone. Errors are ``||mu_t - mu||^2`` and
``||Sigma_t - Sigma||_F^2``.

The chain runner is vectorised over replications: every replication owns an
:class:`RngStream` and draws its noise from it, and only the recursion itself
runs on stacked arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import MixConfig
from .errors import DimensionMismatch, EmptySample
from .linalg_stats import RngStream, batch_psd_factor, cholesky, psd_factor, sample_cov, sample_mean

__all__ = [
    "GaussianModel",
    "GaussianTrajectory",
    "GaussianBatch",
    "weighted_mean_update",
    "weighted_cov_update",
    "run_gaussian_chain",
    "run_gaussian_chains",
    "run_general_weight_mean_chains",
]

_REAL, _SYNTH = 0, 1
# Noise is drawn in time-chunks of at most this many doubles per replication.
_CHUNK_DOUBLES = 1 << 20


@dataclass(frozen=True)
class GaussianModel:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (mu.size, mu.size):
            raise DimensionMismatch(f"sigma {sigma.shape} does not match mu of length {mu.size}")
        if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-14):
            raise ValueError("sigma must be symmetric")
        cholesky(sigma + 1e-12 * np.eye(mu.size))  # raises NotPsd
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.mu.size

    @classmethod
    def isotropic(cls, p: int, scale: float | None = None) -> "GaussianModel":
        """Zero mean, covariance ``scale * I``; ``scale`` defaults to ``1/p``."""
        scale = 1.0 / p if scale is None else scale
        return cls(np.zeros(p), scale * np.eye(p))


@dataclass
class GaussianTrajectory:
    """Per-step errors for ``t = 0..T`` of a single chain."""

    mean_err: np.ndarray
    cov_err: np.ndarray
    clamped: np.ndarray

    @property
    def steps(self) -> int:
        return self.mean_err.size - 1


@dataclass
class GaussianBatch:
    """Errors of ``R`` replications, each array shaped ``(R, T + 1)``."""

    mean_err: np.ndarray
    cov_err: np.ndarray
    clamped: np.ndarray
    final_mu: np.ndarray
    final_sigma: np.ndarray

    def trajectory(self, r: int) -> GaussianTrajectory:
        return GaussianTrajectory(self.mean_err[r], self.cov_err[r], self.clamped[r])


def weighted_mean_update(real_xs, synth_xs, w: float) -> np.ndarray:
    """``w * mean(real_xs) + (1 - w) * mean(synth_xs)``."""
    return w * sample_mean(real_xs) + (1.0 - w) * sample_mean(synth_xs)


def weighted_cov_update(s_hat, s_tilde, w: float) -> np.ndarray:
    s_hat = np.asarray(s_hat, dtype=float)
    s_tilde = np.asarray(s_tilde, dtype=float)
    if s_hat.shape != s_tilde.shape:
        raise DimensionMismatch(f"{s_hat.shape} vs {s_tilde.shape}")
    out = w * s_hat + (1.0 - w) * s_tilde
    return 0.5 * (out + out.T)


def _noise_stats(gen: np.random.Generator, steps: int, count: int, p: int, exact: bool):
    """Means ``(steps, p)`` and unbiased covariances ``(steps, p, p)`` of ``count`` standard normals.

    With ``exact=False`` the two statistics are drawn directly from their
    joint law: the mean is ``N(0, I/count)`` and, independently, the scatter
    matrix is Wishart with ``count - 1`` degrees of freedom (Bartlett
    decomposition). This needs ``count - 1 >= p``; otherwise, or with
    ``exact=True``, the samples themselves are drawn and reduced.
    """
    nu = count - 1
    if not exact and nu >= p:
        zbar = gen.standard_normal((steps, p)) / np.sqrt(count)
        lower = np.tril_indices(p, -1)
        A = np.zeros((steps, p, p))
        A[:, lower[0], lower[1]] = gen.standard_normal((steps, lower[0].size))
        diag = np.arange(p)
        A[:, diag, diag] = np.sqrt(gen.chisquare(nu - diag, size=(steps, p)))
        return zbar, A @ np.swapaxes(A, 1, 2) / nu

    # Draws are consumed in C order, so chunking never changes which
    # numbers land in which step.
    zbar = np.empty((steps, p))
    scov = np.empty((steps, p, p))
    chunk = max(1, _CHUNK_DOUBLES // (count * p))
    for start in range(0, steps, chunk):
        stop = min(steps, start + chunk)
        z = gen.standard_normal((stop - start, count, p))
        zb = z.mean(axis=1)
        d = z - zb[:, None, :]
        zbar[start:stop] = zb
        scov[start:stop] = np.swapaxes(d, 1, 2) @ d / (count - 1)
    return zbar, scov


def run_gaussian_chains(truth: GaussianModel, cfg: MixConfig, steps: int,
                        rngs: Sequence[RngStream], exact_samples: bool = False) -> GaussianBatch:
    """Run one chain per stream in ``rngs``; see the module docstring.

    Real draws are ``mu + L z`` with ``L`` the Cholesky factor of the truth,
    synthetic draws ``mu_{t-1} + L_{t-1} z``. Sample means and covariances
    are affine in the noise statistics, so ``mean(x) = mu + L zbar`` and
    ``S = L S_z L^T``; only those statistics are kept. ``exact_samples``
    materialises every draw instead of sampling the statistics directly
    (same law, much slower for large ``n`` or ``m``).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    R, p = len(rngs), truth.p
    n, m, w = cfg.n, cfg.m, cfg.w
    L_true, _ = psd_factor(truth.sigma)

    real_zbar = np.empty((R, steps + 1, p))
    real_scov = np.empty((R, steps + 1, p, p))
    syn_zbar = np.empty((R, steps, p))
    syn_scov = np.empty((R, steps, p, p))
    for r, rng in enumerate(rngs):
        real_zbar[r], real_scov[r] = _noise_stats(rng.substream(_REAL), steps + 1, n, p, exact_samples)
        syn_zbar[r], syn_scov[r] = _noise_stats(rng.substream(_SYNTH), steps, m, p, exact_samples)

    real_mu = truth.mu + real_zbar @ L_true.T
    real_S = L_true @ real_scov @ L_true.T

    mean_err = np.empty((R, steps + 1))
    cov_err = np.empty((R, steps + 1))
    clamped = np.zeros((R, steps + 1), dtype=bool)

    mu = real_mu[:, 0]
    sigma = real_S[:, 0]
    with np.errstate(over="ignore", invalid="ignore"):
        mean_err[:, 0] = np.sum((mu - truth.mu) ** 2, axis=1)
        cov_err[:, 0] = np.sum((sigma - truth.sigma) ** 2, axis=(1, 2))
        for t in range(1, steps + 1):
            L, clamped[:, t] = batch_psd_factor(sigma)
            syn_mu = mu + np.einsum("rab,rb->ra", L, syn_zbar[:, t - 1])
            syn_S = L @ syn_scov[:, t - 1] @ np.swapaxes(L, 1, 2)
            mu = w * real_mu[:, t] + (1.0 - w) * syn_mu
            sigma = w * real_S[:, t] + (1.0 - w) * syn_S
            sigma = 0.5 * (sigma + np.swapaxes(sigma, 1, 2))
            mean_err[:, t] = np.sum((mu - truth.mu) ** 2, axis=1)
            cov_err[:, t] = np.sum((sigma - truth.sigma) ** 2, axis=(1, 2))
    mean_err[~np.isfinite(mean_err)] = np.inf
    cov_err[~np.isfinite(cov_err)] = np.inf
    return GaussianBatch(mean_err, cov_err, clamped, mu, sigma)


def run_gaussian_chain(truth: GaussianModel, cfg: MixConfig, steps: int,
                       rng: RngStream, exact_samples: bool = False) -> GaussianTrajectory:
    return run_gaussian_chains(truth, cfg, steps, [rng], exact_samples).trajectory(0)


def run_gaussian_chain_explicit(truth: GaussianModel, cfg: MixConfig, steps: int,
                                rng: RngStream) -> GaussianTrajectory:
    """Unvectorised reference loop that materialises every sample.

    Slow; kept as an independent check on :func:`run_gaussian_chains`.
    Uses its own draws, so results agree in distribution only.
    """
    from .linalg_stats import sample_mvn

    L_true, _ = psd_factor(truth.sigma)
    xs = sample_mvn(truth.mu, L_true, cfg.n, rng)
    mu, sigma = sample_mean(xs), sample_cov(xs)
    mean_err = [float(np.sum((mu - truth.mu) ** 2))]
    cov_err = [float(np.sum((sigma - truth.sigma) ** 2))]
    clamped = [False]
    for _ in range(steps):
        L, c = psd_factor(sigma)
        synth = sample_mvn(mu, L, cfg.m, rng)
        real = sample_mvn(truth.mu, L_true, cfg.n, rng)
        mu = weighted_mean_update(real, synth, cfg.w)
        sigma = weighted_cov_update(sample_cov(real), sample_cov(synth), cfg.w)
        mean_err.append(float(np.sum((mu - truth.mu) ** 2)))
        cov_err.append(float(np.sum((sigma - truth.sigma) ** 2)))
        clamped.append(c)
    return GaussianTrajectory(np.array(mean_err), np.array(cov_err), np.array(clamped))


def run_general_weight_mean_chains(truth: GaussianModel, real_weights, synth_weights, steps: int,
                                   rngs: Sequence[RngStream]) -> np.ndarray:
    """Mean-only chains with one weight per sample.

    ``mu_t = (1/n) sum_i a_i x_i + (1/m) sum_j b_j x~_j`` where the weights
    must satisfy ``mean(a) + mean(b) == 1``. Returns squared mean errors of
    shape ``(R, steps + 1)``. Only the mean is weighted per sample; the
    covariance recursion uses the group weight ``mean(a)``.
    """
    a = np.asarray(real_weights, dtype=float)
    b = np.asarray(synth_weights, dtype=float)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise EmptySample("weight vectors must be nonempty")
    if abs(a.mean() + b.mean() - 1.0) > 1e-12:
        raise ValueError("weights must satisfy mean(a) + mean(b) == 1")
    wg = a.mean()
    R, p = len(rngs), truth.p
    L_true, _ = psd_factor(truth.sigma)
    out = np.empty((R, steps + 1))
    for r, rng in enumerate(rngs):
        g_real, g_syn = rng.substream(_REAL), rng.substream(_SYNTH)
        x = truth.mu + g_real.standard_normal((n, p)) @ L_true.T
        mu, sigma = x.mean(axis=0), sample_cov(x)
        out[r, 0] = np.sum((mu - truth.mu) ** 2)
        for t in range(1, steps + 1):
            L, _ = psd_factor(sigma)
            xs = mu + g_syn.standard_normal((m, p)) @ L.T
            x = truth.mu + g_real.standard_normal((n, p)) @ L_true.T
            mu = (a @ x) / n + (b @ xs) / m
            sigma = wg * sample_cov(x) + (1.0 - wg) * sample_cov(xs)
            out[r, t] = np.sum((mu - truth.mu) ** 2)
    return out
