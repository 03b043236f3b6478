"""Recursive weighted empirical-CDF estimation with exact Cramér-von Mises error.

The CvM criterion ``int (F_t - F)^2 dF`` is distribution-free, so the true
law is fixed to Uniform[0, 1] and atoms live on the probability scale
``u = F(x)``. The error of a step function ``G`` is then
``int_0^1 (G(u) - u)^2 du``, which has a closed form on each interval
between consecutive atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import MixConfig
from .linalg_stats import RngStream

__all__ = [
    "WeightedEcdf",
    "CdfTrajectory",
    "CdfBatch",
    "combine_ecdf",
    "sample_from_ecdf",
    "cvm_error",
    "cvm_error_batch",
    "cvm_error_quadrature",
    "ecdf_values",
    "run_cdf_chain",
    "run_cdf_chains",
    "cvm_error_discrete",
    "cvm_discrete_baseline",
    "run_categorical_chains",
]

_REAL, _SYNTH = 0, 1
_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WeightedEcdf:
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        wts = np.asarray(self.weights, dtype=float).ravel()
        if pos.shape != wts.shape or pos.size == 0:
            raise ValueError("positions and weights must be nonempty and of equal length")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        if abs(wts.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {wts.sum()!r}, not 1")
        if np.any((pos < 0) | (pos > 1)):
            raise ValueError("positions must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def plain(cls, us) -> "WeightedEcdf":
        us = np.asarray(us, dtype=float).ravel()
        return cls(us, np.full(us.size, 1.0 / us.size))

    def merged(self) -> "WeightedEcdf":
        """Equal positions collapsed into one atom; positions come back sorted."""
        uniq, inv = np.unique(self.positions, return_inverse=True)
        return WeightedEcdf(uniq, np.bincount(inv, weights=self.weights))

    def __len__(self):
        return self.positions.size


@dataclass
class CdfTrajectory:
    cvm_err: np.ndarray


@dataclass
class CdfBatch:
    cvm_err: np.ndarray          # (R, T + 1)
    final_positions: np.ndarray  # (R, n + m)
    final_weights: np.ndarray    # (n + m,) shared by every replication

    def trajectory(self, r: int) -> CdfTrajectory:
        return CdfTrajectory(self.cvm_err[r])

    def final_ecdf(self, r: int) -> WeightedEcdf:
        return WeightedEcdf(self.final_positions[r], self.final_weights)


def combine_ecdf(real_us, synth_us, w: float, merge: bool = True) -> WeightedEcdf:
    """``n`` atoms of weight ``w/n`` plus ``m`` atoms of weight ``(1-w)/m``."""
    real_us = np.asarray(real_us, dtype=float).ravel()
    synth_us = np.asarray(synth_us, dtype=float).ravel()
    n, m = real_us.size, synth_us.size
    pos = np.concatenate([real_us, synth_us])
    wts = np.concatenate([np.full(n, w / n if n else 0.0), np.full(m, (1.0 - w) / m if m else 0.0)])
    f = WeightedEcdf(pos, wts / wts.sum())
    return f.merged() if merge else f


def _inverse_cdf_indices(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(weights)
    # side="right" skips zero-weight atoms
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return np.minimum(idx, weights.size - 1)


def sample_from_ecdf(f: WeightedEcdf, count: int, rng: RngStream) -> np.ndarray:
    """I.i.d. draws from the atom distribution by inverting cumulative weights."""
    return f.positions[_inverse_cdf_indices(f.weights, rng.random(count))]


def cvm_error_batch(positions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Closed-form CvM error for stacked atom sets.

    ``positions`` is ``(R, K)``; ``weights`` is ``(K,)`` or ``(R, K)``. On an
    interval ``[a, b)`` where the step function equals ``c`` the integrand
    contributes ``((c - a)^3 - (c - b)^3) / 3``.
    """
    positions = np.atleast_2d(positions)
    order = np.argsort(positions, axis=1)
    pos = np.take_along_axis(positions, order, axis=1)
    weights = np.asarray(weights, dtype=float)
    wts = weights[order] if weights.ndim == 1 else np.take_along_axis(weights, order, axis=1)
    R = pos.shape[0]
    level = np.empty((R, pos.shape[1] + 1))
    level[:, 0] = 0.0
    np.cumsum(wts, axis=1, out=level[:, 1:])
    level[:, -1] = 1.0  # drop accumulated rounding at the top
    a = level.copy()
    a[:, 1:] -= pos
    b = level
    b[:, :-1] -= pos
    b[:, -1] -= 1.0
    return np.sum(a * a * a - b * b * b, axis=1) / 3.0


def cvm_error(f: WeightedEcdf) -> float:
    return float(cvm_error_batch(f.positions[None], f.weights)[0])


def ecdf_values(f: WeightedEcdf, u) -> np.ndarray:
    """``G(u) = sum of weights at positions <= u``."""
    order = np.argsort(f.positions, kind="stable")
    pos, cum = f.positions[order], np.cumsum(f.weights[order])
    idx = np.searchsorted(pos, np.asarray(u, dtype=float), side="right")
    return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def cvm_error_quadrature(f: WeightedEcdf, points: int = 10 ** 5) -> float:
    """Midpoint-rule approximation of the CvM error; brute-force reference."""
    u = (np.arange(points) + 0.5) / points
    return float(np.mean((ecdf_values(f, u) - u) ** 2))


def _uniform_blocks(gen, steps, count):
    return gen.random((steps, count))


def run_cdf_chains(cfg: MixConfig, steps: int, rngs: Sequence[RngStream]) -> CdfBatch:
    """Recursive weighted ECDF, one chain per stream.

    Step 0 is the plain ECDF of ``n`` uniforms. Every later step resamples
    ``m`` synthetic points from the previous ECDF and adds ``n`` fresh
    uniforms. Atoms are kept unmerged; the count is fixed at ``n + m``.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    R, n, m, w = len(rngs), cfg.n, cfg.m, cfg.w
    real_gen = [rng.substream(_REAL) for rng in rngs]
    syn_gen = [rng.substream(_SYNTH) for rng in rngs]
    err = np.empty((R, steps + 1))

    pos = np.stack([g.random(n) for g in real_gen])
    wts = np.full(n, 1.0 / n)
    err[:, 0] = cvm_error_batch(pos, wts)
    mixed = np.concatenate([np.full(n, w / n), np.full(m, (1.0 - w) / m)])
    for t in range(1, steps + 1):
        u = np.stack([g.random(m) for g in syn_gen])
        synth = np.take_along_axis(pos, _inverse_cdf_indices(wts, u), axis=1)
        real = np.stack([g.random(n) for g in real_gen])
        pos = np.concatenate([real, synth], axis=1)
        wts = mixed
        err[:, t] = cvm_error_batch(pos, wts)
    return CdfBatch(err, pos, wts)


def run_cdf_chain(cfg: MixConfig, steps: int, rng: RngStream) -> CdfTrajectory:
    return run_cdf_chains(cfg, steps, [rng]).trajectory(0)


# ---------------------------------------------------------------------------
# discrete truth (categorical columns)


def cvm_error_discrete(pmf_hat, pmf_true) -> np.ndarray:
    """``sum_j p_j (G(j) - F(j))^2`` over categories; last axis indexes categories."""
    G = np.cumsum(pmf_hat, axis=-1)
    F = np.cumsum(pmf_true)
    return np.sum(pmf_true * (G - F) ** 2, axis=-1)


def cvm_discrete_baseline(pmf_true, n: int) -> float:
    """Expected discrete CvM error of a plain ``n``-sample ECDF: ``sum p F (1 - F) / n``."""
    pmf_true = np.asarray(pmf_true, dtype=float)
    F = np.cumsum(pmf_true)
    return float(np.sum(pmf_true * F * (1.0 - F)) / n)


def run_categorical_chains(pmf_true, cfg: MixConfig, steps: int,
                           rngs: Sequence[RngStream]) -> np.ndarray:
    """The ECDF recursion on a finite support, tracked as category frequencies.

    Real draws come from ``pmf_true``; synthetic draws from the previous
    weighted pmf. Returns discrete CvM errors ``(R, steps + 1)``.
    """
    pmf_true = np.asarray(pmf_true, dtype=float)
    pmf_true = pmf_true / pmf_true.sum()
    R, n, m, w = len(rngs), cfg.n, cfg.m, cfg.w
    real_gen = [rng.substream(_REAL) for rng in rngs]
    syn_gen = [rng.substream(_SYNTH) for rng in rngs]
    err = np.empty((R, steps + 1))
    pmf = np.stack([g.multinomial(n, pmf_true) / n for g in real_gen])
    err[:, 0] = cvm_error_discrete(pmf, pmf_true)
    for t in range(1, steps + 1):
        synth = np.stack([g.multinomial(m, np.clip(pmf[r], 0, None) / pmf[r].sum())
                          for r, g in enumerate(syn_gen)]) / m
        real = np.stack([g.multinomial(n, pmf_true) for g in real_gen]) / n
        pmf = w * real + (1.0 - w) * synth
        err[:, t] = cvm_error_discrete(pmf, pmf_true)
    return err
