"""Closed-form limits, optimal weights, thresholds and finite-step recursions.

All functions are pure. Divergent limits are returned as ``math.inf``
rather than raised.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "Regime",
    "CovLimit",
    "c_factor",
    "optimal_weight",
    "naive_weight",
    "gaussian_mean_limit",
    "gaussian_mean_error_at",
    "cov_divergence_threshold",
    "gaussian_cov_limit",
    "gaussian_cov_limit_finite",
    "gaussian_cov_error_at",
    "gaussian_cov_optimal_weight",
    "glm_scaled_error",
    "glm_scaled_error_optimal",
    "glm_scaled_error_naive",
    "glm_limit_error",
    "cov_opnorm_beta",
    "cdf_limit_error",
    "cdf_error_at",
    "cdf_optimal_weight",
    "cdf_improvement_threshold",
    "classify_regime",
]

GOLDEN_WEIGHT = (math.sqrt(5.0) - 1.0) / 2.0
_NEAR_ZERO_D = 1e-13


class Regime(enum.Enum):
    COLLAPSE = "collapse"
    NO_IMPROVEMENT = "no_improvement"
    IMPROVEMENT = "improvement"


class CovLimit(NamedTuple):
    value: float
    diverges: bool
    near_threshold: bool


def _check_w(w, *, allow_zero=False):
    lo_ok = w >= 0.0 if allow_zero else w > 0.0
    if not (lo_ok and w <= 1.0) or math.isnan(w):
        raise DomainError(f"w must lie in {'[0' if allow_zero else '(0'}, 1], got {w}")


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0 or math.isinf(v):
            raise DomainError(f"{name} must be positive and finite, got {v}")


def _check_sizes(n, m):
    if n < 2 or m < 2:
        raise DomainError(f"n and m must be >= 2, got n={n}, m={m}")


def c_factor(w: float, k: float) -> float:
    """Limiting-error amplification ``(w^2 + (1-w)^2 k) / (2w - w^2)``."""
    _check_w(w)
    _check_positive(k=k)
    return (w * w + (1.0 - w) ** 2 * k) / (w * (2.0 - w))


def optimal_weight(k: float) -> float:
    """Minimiser of :func:`c_factor` over ``w``: ``(sqrt(k^2 + 4k) - k) / 2``.

    Written as ``2k / (sqrt(k^2 + 4k) + k)`` to avoid cancellation for large k.
    """
    _check_positive(k=k)
    return 2.0 * k / (math.sqrt(k * k + 4.0 * k) + k)


def naive_weight(k: float) -> float:
    """Implicit real-data weight ``k / (k + 1)`` of pooling both samples unweighted."""
    _check_positive(k=k)
    return k / (k + 1.0)


def gaussian_mean_limit(w: float, k: float, n: float, tr_sigma: float) -> float:
    _check_positive(n=n)
    return c_factor(w, k) * tr_sigma / n


def gaussian_mean_error_at(w: float, n: int, m: int, t: int, tr_sigma: float) -> float:
    """Exact ``E||mu_t - mu||^2`` after ``t`` steps (step 0 is real-only)."""
    _check_w(w, allow_zero=True)
    if t < 0:
        raise DomainError("t must be >= 0")
    a = (1.0 - w) ** 2
    b = (w * w / n + a / m) * tr_sigma
    err = tr_sigma / n
    for _ in range(t):
        err = a * err + b
    return err


def cov_divergence_threshold(m: int) -> float:
    """``1 - sqrt((m-1)/(m+1))``: at or below this weight the covariance error diverges."""
    if m < 2:
        raise DomainError("m must be >= 2")
    return 1.0 - math.sqrt((m - 1.0) / (m + 1.0))


def gaussian_cov_limit(w, n, m, tr_sigma, tr_sigma_sq) -> CovLimit:
    """Limiting ``E||Sigma_t - Sigma||_F^2`` as ``N/D - tr(Sigma^2)``.

    Returns ``inf`` with ``diverges=True`` at or below the divergence
    threshold, and ``inf`` with ``near_threshold=True`` when ``|D| < 1e-13``.
    """
    _check_w(w)
    _check_sizes(n, m)
    if w <= cov_divergence_threshold(m):
        return CovLimit(math.inf, True, False)
    s = w * (2.0 - w)
    a = (w - 1.0) ** 2
    t1, t2 = tr_sigma * tr_sigma, tr_sigma_sq
    N = (s * t2
         + a * (t1 * s + 2.0 * w * w * t2 / (n - 1)) / ((m - 1) * s)
         + w * w * (t1 + t2) / (n - 1))
    D = s - 2.0 * a * a / ((m - 1) ** 2 * s) - a / (m - 1)
    if abs(D) < _NEAR_ZERO_D:
        return CovLimit(math.inf, True, True)
    return CovLimit(N / D - t2, False, False)


def gaussian_cov_limit_finite(w, n, m, tr_sigma, tr_sigma_sq) -> float:
    return gaussian_cov_limit(w, n, m, tr_sigma, tr_sigma_sq).value


def _cov_moment_step(w, n, m, tr_sigma, tr_sigma_sq):
    """Linear map on ``(E tr^2(Sigma_t), E tr(Sigma_t^2))``.

    Follows from the Wishart moments ``E tr^2(S) = tr^2 + 2 tr(Sigma^2)/nu``
    and ``E tr(S^2) = (1 + 1/nu) tr(Sigma^2) + tr^2/nu``, ``nu`` the degrees of
    freedom, plus unbiasedness of every iterate.
    """
    a = (1.0 - w) ** 2
    A = a * np.array([[1.0, 2.0 / (m - 1)], [1.0 / (m - 1), m / (m - 1.0)]])
    t1, t2 = tr_sigma ** 2, tr_sigma_sq
    b = np.array([
        t1 * (2 * w - w * w) + 2 * w * w * t2 / (n - 1),
        t1 * w * w / (n - 1) + (2 * w - w * w + w * w / (n - 1)) * t2,
    ])
    return A, b


def gaussian_cov_error_at(w, n, m, t, tr_sigma, tr_sigma_sq) -> float:
    """Exact ``E||Sigma_t - Sigma||_F^2`` after ``t`` steps of the recursion."""
    _check_w(w, allow_zero=True)
    _check_sizes(n, m)
    if t < 0:
        raise DomainError("t must be >= 0")
    A, b = _cov_moment_step(w, n, m, tr_sigma, tr_sigma_sq)
    t1, t2 = tr_sigma ** 2, tr_sigma_sq
    v = np.array([t1 + 2 * t2 / (n - 1), n / (n - 1.0) * t2 + t1 / (n - 1)])
    for _ in range(t):
        v = A @ v + b
    return float(v[1] - t2)


def gaussian_cov_optimal_weight(n, m, tr_sigma, tr_sigma_sq, tol=1e-10) -> float:
    """Numeric minimiser of :func:`gaussian_cov_limit_finite` over the convergent range of ``w``."""
    from scipy.optimize import minimize_scalar

    lo = cov_divergence_threshold(m)
    res = minimize_scalar(
        lambda w: gaussian_cov_limit_finite(w, n, m, tr_sigma, tr_sigma_sq),
        bounds=(lo + 1e-9, 1.0), method="bounded", options={"xatol": tol})
    return float(res.x)


def glm_scaled_error(w: float, k: float, t: int, tr_sigma0_inv: float) -> float:
    """Iterate ``E_t = (1-w)^2 E_{t-1} + ((1-w)^2 k + w^2) tr`` from ``E_0 = tr``."""
    _check_w(w)
    _check_positive(k=k)
    if t < 0:
        raise DomainError("t must be >= 0")
    a = (1.0 - w) ** 2
    b = (a * k + w * w) * tr_sigma0_inv
    err = tr_sigma0_inv
    for _ in range(int(t)):
        err = a * err + b
    return err


def glm_scaled_error_optimal(k: float, t: int, tr_sigma0_inv: float) -> float:
    """Closed form at ``w = optimal_weight(k)``: ``tr * (w + (1-w)^(2t+1))``."""
    w = optimal_weight(k)
    return tr_sigma0_inv * (w + (1.0 - w) ** (2 * t + 1))


def glm_scaled_error_naive(k: float, t: int, tr_sigma0_inv: float) -> float:
    """Closed form at ``w = naive_weight(k)``."""
    _check_positive(k=k)
    return tr_sigma0_inv * ((k + 1) / (k + 2) + (1.0 / (k + 1)) ** (2 * t) / (k + 2))


def glm_limit_error(w: float, k: float, tr_sigma0_inv: float) -> float:
    return c_factor(w, k) * tr_sigma0_inv


def cov_opnorm_beta(w: float, k: float, T: int) -> float:
    """Finite-horizon operator-norm factor; tends to ``c_factor(w, k)``."""
    _check_w(w)
    _check_positive(k=k)
    if T < 0:
        raise DomainError("T must be >= 0")
    decay = (1.0 - w) ** (2 * T)
    return decay + ((1.0 - w) ** 2 * k + w * w) * (1.0 - decay) / (w * (2.0 - w))


def cdf_limit_error(w: float, n: int, m: int) -> float:
    """Limiting Cramér-von Mises error of the recursive weighted ECDF."""
    _check_w(w)
    _check_sizes(n, m)
    num = w * w / n + (1.0 - w) ** 2 / m
    den = 1.0 - (1.0 - w) ** 2 * (1.0 - 1.0 / m)
    return num / den / 6.0


def cdf_error_at(w: float, n: int, m: int, t: int) -> float:
    """Expected CvM error after ``t`` steps, starting from ``1/(6n)``."""
    _check_w(w, allow_zero=True)
    _check_sizes(n, m)
    a = (1.0 - w) ** 2 * (1.0 - 1.0 / m)
    b = (w * w / n + (1.0 - w) ** 2 / m) / 6.0
    err = 1.0 / (6.0 * n)
    for _ in range(int(t)):
        err = a * err + b
    return err


def cdf_optimal_weight(n: float, m: float) -> float:
    """Minimiser of :func:`cdf_limit_error` over ``w``.

    Setting the derivative to zero leaves ``(m-1) w^2 + (n+1) w - n = 0``;
    the positive root is written without cancellation. As ``n, m`` grow
    with ``n/m = k`` it tends to ``optimal_weight(k)``.
    """
    _check_positive(n=n)
    if not m >= 1:
        raise DomainError(f"m must be >= 1, got {m}")
    b = n + 1.0
    return 2.0 * n / (b + math.sqrt(b * b + 4.0 * n * (m - 1.0)))


def cdf_improvement_threshold(n: int, m: int) -> float:
    """Weights at or below ``(n-1)/(n+2m-1)`` do no better than real data alone."""
    _check_sizes(n, m)
    return (n - 1.0) / (n + 2.0 * m - 1.0)


def classify_regime(setting: str, w: float, n: int, m: int,
                    tr_sigma: float = 1.0, tr_sigma_sq: float = 1.0) -> Regime:
    """Collapse / no-improvement / improvement for ``"gaussian_cov"`` or ``"cdf"``.

    The Gaussian covariance case compares finite-sample limits against
    ``w = 1``; the trace arguments default to a scalar unit variance.
    """
    _check_w(w)
    _check_sizes(n, m)
    if setting == "gaussian_cov":
        lim = gaussian_cov_limit(w, n, m, tr_sigma, tr_sigma_sq)
        if lim.diverges:
            return Regime.COLLAPSE
        ref = gaussian_cov_limit_finite(1.0, n, m, tr_sigma, tr_sigma_sq)
        return Regime.IMPROVEMENT if lim.value < ref else Regime.NO_IMPROVEMENT
    if setting == "cdf":
        if w <= cdf_improvement_threshold(n, m):
            return Regime.NO_IMPROVEMENT
        return Regime.IMPROVEMENT
    raise DomainError(f"unknown setting {setting!r}")
