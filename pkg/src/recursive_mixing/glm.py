"""Weighted maximum likelihood for linear, logistic and Poisson regression,
and the recursive weighted-MLE chain built on it.

Responses are scalar per covariate row and every family uses its canonical
link, so the per-row negative log-likelihood is ``A(eta) - y * eta`` (up to
terms free of ``theta``) with ``eta = x @ theta``:

=========  ===================  ===============
family     A(eta)               A''(eta)
=========  ===================  ===============
linear     eta^2 / (2 sd^2)     1 / sd^2
logistic   log(1 + e^eta)       s (1 - s)
poisson    e^eta                e^eta
=========  ===================  ===============

For the linear family ``y`` is divided by ``sd^2`` as well, i.e. the NLL is
``(y - eta)^2 / (2 sd^2)`` with the ``y^2`` term dropped.

Real rows carry weight ``w / n`` and synthetic rows ``(1 - w) / m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .config import MixConfig
from .errors import DimensionMismatch, NoConvergence, PoissonOverflow, SingularHessian
from .gaussian import GaussianModel
from .linalg_stats import RngStream, psd_factor

__all__ = [
    "GlmFamily",
    "GlmProblem",
    "GlmTrajectory",
    "GlmBatch",
    "FitResult",
    "glm_response",
    "draw_responses",
    "weighted_nll",
    "weighted_nll_grad",
    "weighted_nll_hess",
    "fit_weighted_mle",
    "fit_weighted_mle_batch",
    "fisher_information",
    "trace_inverse_fisher",
    "run_glm_chain",
    "run_glm_chains",
]

POISSON_MEAN_LIMIT = 1e9
MAX_NEWTON_ITER = 100
GRAD_TOL = 1e-8
STEP_TOL = 1e-6
MAX_COND = 1e12
RIDGE = 1e-8
_FAMILIES = ("linear", "logistic", "poisson")
_COV, _REAL_Y, _SYN_Y = 0, 1, 2


@dataclass(frozen=True)
class GlmFamily:
    kind: str
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {_FAMILIES}")
        if self.kind == "linear" and not (np.isfinite(self.noise_sd) and self.noise_sd > 0):
            raise ValueError("linear noise_sd must be finite and positive")

    @classmethod
    def linear(cls, noise_sd: float = 1.0) -> "GlmFamily":
        return cls("linear", noise_sd)

    @classmethod
    def logistic(cls) -> "GlmFamily":
        return cls("logistic")

    @classmethod
    def poisson(cls) -> "GlmFamily":
        return cls("poisson")

    # cumulant A, its first and second derivative, all elementwise in eta
    def cumulant(self, eta):
        if self.kind == "linear":
            return 0.5 * eta * eta / self.noise_sd ** 2
        if self.kind == "logistic":
            return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))
        return np.exp(eta)

    def mean(self, eta):
        if self.kind == "linear":
            return eta / self.noise_sd ** 2
        if self.kind == "logistic":
            return _sigmoid(eta)
        return np.exp(eta)

    def variance(self, eta):
        if self.kind == "linear":
            return np.full_like(eta, 1.0 / self.noise_sd ** 2)
        if self.kind == "logistic":
            s = _sigmoid(eta)
            return s * (1.0 - s)
        return np.exp(eta)

    def sufficient(self, y):
        return y / self.noise_sd ** 2 if self.kind == "linear" else y


def _sigmoid(eta):
    return expit(eta)


@dataclass(frozen=True)
class GlmProblem:
    family: GlmFamily
    theta_star: np.ndarray
    covariate_law: GaussianModel

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta_star must be finite")
        if theta.size != self.covariate_law.p:
            raise DimensionMismatch("theta_star and covariate law disagree on p")
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "_cov_factor", psd_factor(self.covariate_law.sigma)[0])

    @property
    def p(self) -> int:
        return self.theta_star.size

    @classmethod
    def scenario(cls, family: GlmFamily, p: int = 4) -> "GlmProblem":
        """All-ones coefficients with covariates ``N(0, I/p)``."""
        return cls(family, np.ones(p), GaussianModel.isotropic(p))

    def draw_covariates(self, gen: np.random.Generator, count: int) -> np.ndarray:
        return self.covariate_law.mu + gen.standard_normal((count, self.p)) @ self._cov_factor.T

    def draw_real(self, gen_x: np.random.Generator, gen_y: np.random.Generator, count: int):
        """Fresh covariates with responses from ``theta_star``."""
        X = self.draw_covariates(gen_x, count)
        return X, draw_responses(self.family, X, self.theta_star, gen_y)


@dataclass
class GlmTrajectory:
    theta_err: np.ndarray
    newton_iters: np.ndarray
    converged: np.ndarray
    failed: bool = False
    failure: str = ""


@dataclass
class GlmBatch:
    """Stacked trajectories, arrays shaped ``(R, T + 1)``; ``failed`` is ``(R,)``."""

    theta_err: np.ndarray
    newton_iters: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    failure: list = field(default_factory=list)
    final_theta: np.ndarray | None = None

    def trajectory(self, r: int) -> GlmTrajectory:
        return GlmTrajectory(self.theta_err[r], self.newton_iters[r], self.converged[r],
                             bool(self.failed[r]), self.failure[r])


def draw_responses(family: GlmFamily, X, theta, gen: np.random.Generator) -> np.ndarray:
    """One response per row of ``X`` under ``theta``."""
    eta = np.asarray(X, dtype=float) @ np.asarray(theta, dtype=float)
    if family.kind == "linear":
        return eta + family.noise_sd * gen.standard_normal(eta.shape)
    if family.kind == "logistic":
        return (gen.random(eta.shape) < _sigmoid(eta)).astype(float)
    with np.errstate(over="ignore"):
        lam = np.exp(eta)
    if not np.all(lam <= POISSON_MEAN_LIMIT):
        raise PoissonOverflow(f"Poisson mean {np.max(lam):.3e} exceeds {POISSON_MEAN_LIMIT:.0e}")
    return gen.poisson(lam).astype(float)


def glm_response(family: GlmFamily, x, theta, rng: RngStream) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if x.shape != theta.shape:
        raise DimensionMismatch(f"{x.shape} vs {theta.shape}")
    return float(draw_responses(family, x[None, :], theta, rng.gen)[0])


# ---------------------------------------------------------------------------
# weighted objective


def _stack(real_data, synth_data, w):
    (Xr, yr), (Xs, ys) = real_data, synth_data
    Xr, Xs = np.atleast_2d(np.asarray(Xr, dtype=float)), np.atleast_2d(np.asarray(Xs, dtype=float))
    yr, ys = np.asarray(yr, dtype=float).ravel(), np.asarray(ys, dtype=float).ravel()
    n, m = len(yr), len(ys)
    parts_X, parts_y, parts_w = [], [], []
    if n and w > 0:
        parts_X.append(Xr); parts_y.append(yr); parts_w.append(np.full(n, w / n))
    if m and w < 1:
        parts_X.append(Xs); parts_y.append(ys); parts_w.append(np.full(m, (1.0 - w) / m))
    if not parts_X:
        raise ValueError("no data carries positive weight")
    return np.vstack(parts_X), np.concatenate(parts_y), np.concatenate(parts_w)


def _eta(X, theta):
    return (X @ theta[..., None])[..., 0]


def _objective(family, X, y, sw, theta):
    # X (..., N, p), y (..., N), theta (..., p) -> (...)
    eta = _eta(X, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sum(sw * (family.cumulant(eta) - family.sufficient(y) * eta), axis=-1)


def _gradient(family, X, y, sw, theta):
    eta = _eta(X, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        r = sw * (family.mean(eta) - family.sufficient(y))
    return (r[..., None, :] @ X)[..., 0, :]


def _hessian(family, X, sw, theta):
    eta = _eta(X, theta)
    with np.errstate(over="ignore", invalid="ignore"):
        v = sw * family.variance(eta)
    return np.swapaxes(X * v[..., None], -1, -2) @ X


def weighted_nll(family: GlmFamily, theta, real_data, synth_data, w: float) -> float:
    """``-(w/n) sum log P(real) - ((1-w)/m) sum log P(synth)`` without theta-free constants.

    ``real_data`` and ``synth_data`` are ``(X, y)`` pairs. The dropped
    constants are ``log y!`` (Poisson) and ``y^2 / (2 sd^2) + log(sd sqrt(2 pi))``
    (linear).
    """
    X, y, sw = _stack(real_data, synth_data, w)
    return float(_objective(family, X, y, sw, np.asarray(theta, dtype=float)))


def weighted_nll_grad(family, theta, real_data, synth_data, w) -> np.ndarray:
    X, y, sw = _stack(real_data, synth_data, w)
    return _gradient(family, X, y, sw, np.asarray(theta, dtype=float))


def weighted_nll_hess(family, theta, real_data, synth_data, w) -> np.ndarray:
    X, y, sw = _stack(real_data, synth_data, w)
    return _hessian(family, X, sw, np.asarray(theta, dtype=float))


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    theta: np.ndarray      # (R, p)
    iters: np.ndarray      # (R,)
    converged: np.ndarray  # (R,)
    singular: np.ndarray   # (R,)


def _solve(H, g):
    """Batched ``H^-1 g`` with one ridge retry; rows that stay singular come back NaN."""
    p = H.shape[-1]
    try:
        out = np.linalg.solve(H, g[..., None])[..., 0]
        if np.all(np.isfinite(out)):
            return out, np.zeros(H.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    out = np.full(g.shape, np.nan)
    bad = np.zeros(H.shape[0], dtype=bool)
    eye = np.eye(p)
    for r in range(H.shape[0]):
        for ridge in (0.0, RIDGE):
            try:
                x = np.linalg.solve(H[r] + ridge * eye, g[r])
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(x)):
                out[r] = x
                break
        else:
            bad[r] = True
    return out, bad


def fit_weighted_mle_batch(family: GlmFamily, X, y, sw, init, max_iter: int = MAX_NEWTON_ITER,
                           tol: float = GRAD_TOL) -> FitResult:
    """Minimise the weighted NLL for a stack of problems at once.

    ``X`` is ``(R, N, p)``, ``y`` is ``(R, N)``, ``sw`` the per-row weights
    ``(N,)`` and ``init`` ``(R, p)``. The linear family is solved from the
    weighted normal equations; the others run Newton with step halving until
    ``||grad|| <= tol * (1 + ||grad(init)||)`` and the next Newton step is
    below ``STEP_TOL * (1 + ||theta||)``. The step test matters on separable
    data, where the gradient vanishes while ``theta`` runs off to infinity.
    A stationary point whose Hessian has condition number above ``MAX_COND``
    is reported singular, since the minimiser is not unique there.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.array(init, dtype=float, copy=True)
    R = X.shape[0]
    iters = np.zeros(R, dtype=int)
    if family.kind == "linear":
        Xw = X * sw[:, None]
        H = np.swapaxes(Xw, 1, 2) @ X
        b = (np.swapaxes(Xw, 1, 2) @ y[..., None])[..., 0]
        theta, singular = _solve(H, b)
        return FitResult(theta, iters + 1, ~singular, singular)

    g = _gradient(family, X, y, sw, theta)
    gnorm = np.linalg.norm(g, axis=1)
    thresh = tol * (1.0 + gnorm)
    small_grad = gnorm <= thresh
    active = np.ones(R, dtype=bool)
    singular = np.zeros(R, dtype=bool)
    stalled = np.zeros(R, dtype=bool)
    f = _objective(family, X, y, sw, theta)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, ya = X[idx], y[idx]
        H = _hessian(family, Xa, sw, theta[idx])
        step, bad = _solve(H, g[idx])
        singular[idx[bad]] = True
        active[idx[bad]] = False
        keep = ~bad
        idx, Xa, ya, step, H = idx[keep], Xa[keep], ya[keep], step[keep], H[keep]
        # converged: small gradient and a negligible Newton step at a well-conditioned Hessian
        done = small_grad[idx] & (np.linalg.norm(step, axis=1)
                                  <= STEP_TOL * (1.0 + np.linalg.norm(theta[idx], axis=1)))
        if done.any():
            flat = np.linalg.cond(H[done]) > MAX_COND
            singular[idx[done][flat]] = True
        active[idx[done]] = False
        keep = ~done
        idx, Xa, ya, step = idx[keep], Xa[keep], ya[keep], step[keep]
        if idx.size == 0:
            break
        scale = np.ones(idx.size)
        f_old = f[idx]
        new = theta[idx] - step
        f_new = _objective(family, Xa, ya, sw, new)
        ok = np.isfinite(f_new) & (f_new <= f_old + 1e-12 * (1.0 + np.abs(f_old)))
        for _ in range(50):
            if ok.all():
                break
            scale[~ok] *= 0.5
            new[~ok] = theta[idx[~ok]] - scale[~ok, None] * step[~ok]
            f_new[~ok] = _objective(family, Xa[~ok], ya[~ok], sw, new[~ok])
            ok = np.isfinite(f_new) & (f_new <= f_old + 1e-12 * (1.0 + np.abs(f_old)))
        stalled[idx[~ok]] = True
        upd = idx[ok]
        theta[upd] = new[ok]
        f[upd] = f_new[ok]
        iters[idx] += 1
        g[upd] = _gradient(family, X[upd], y[upd], sw, theta[upd])
        small_grad[upd] = np.linalg.norm(g[upd], axis=1) <= thresh[upd]
        active[idx[~ok]] = False
    converged = ~(active | singular | stalled)
    return FitResult(theta, iters, converged, singular)


def fit_weighted_mle(family: GlmFamily, real_data, synth_data, w: float, init=None,
                     max_iter: int = MAX_NEWTON_ITER) -> np.ndarray:
    """Weighted MLE for one dataset pair; raises on failure.

    Raises :class:`SingularHessian` if the Hessian stays singular after a
    ridge retry and :class:`NoConvergence` after ``MAX_NEWTON_ITER`` Newton
    iterations (or when step halving cannot decrease the objective).
    Zero-weight groups are left out entirely.
    """
    X, y, sw = _stack(real_data, synth_data, w)
    init = np.zeros(X.shape[1]) if init is None else np.asarray(init, dtype=float)
    res = fit_weighted_mle_batch(family, X[None], y[None], sw, init[None], max_iter=max_iter)
    if res.singular[0]:
        raise SingularHessian("Hessian singular even with ridge")
    if not res.converged[0]:
        raise NoConvergence(f"no convergence after {res.iters[0]} iterations")
    return res.theta[0]


def fisher_information(problem: GlmProblem, draws: int = 10 ** 6, seed: int = 0) -> np.ndarray:
    """``E[A''(x theta*) x x^T]`` under the covariate law.

    Closed form for the linear and Poisson families (the latter via the
    Gaussian moment generating function); Monte Carlo with ``draws``
    covariates for the logistic family.
    """
    mu, S = problem.covariate_law.mu, problem.covariate_law.sigma
    th = problem.theta_star
    fam = problem.family
    if fam.kind == "linear":
        return (S + np.outer(mu, mu)) / fam.noise_sd ** 2
    if fam.kind == "poisson":
        c = mu + S @ th
        return np.exp(th @ mu + 0.5 * th @ S @ th) * (S + np.outer(c, c))
    gen = np.random.default_rng(seed)
    out = np.zeros((problem.p, problem.p))
    chunk = 100_000
    for start in range(0, draws, chunk):
        x = problem.draw_covariates(gen, min(chunk, draws - start))
        v = fam.variance(x @ th)
        out += (x * v[:, None]).T @ x
    return out / draws


_FISHER_CACHE: dict = {}


def trace_inverse_fisher(problem: GlmProblem) -> float:
    """``tr(Sigma_0^{-1})``, cached per problem."""
    key = (problem.family, problem.theta_star.tobytes(), problem.covariate_law.mu.tobytes(),
           problem.covariate_law.sigma.tobytes())
    if key not in _FISHER_CACHE:
        _FISHER_CACHE[key] = float(np.trace(np.linalg.inv(fisher_information(problem))))
    return _FISHER_CACHE[key]


# ---------------------------------------------------------------------------
# recursion


def run_glm_chains(problem: GlmProblem, cfg: MixConfig, steps: int,
                   rngs: Sequence[RngStream]) -> GlmBatch:
    """Recursive weighted MLE, one chain per stream, fitted in lockstep.

    Step 0 fits ``n`` real pairs. Each later step draws fresh covariates for
    both groups, real responses from ``theta*`` and synthetic responses from
    the previous fit, then refits warm-started at the previous fit (cold
    start at 0 if that fails). A chain that overflows or fails to fit is
    halted: its remaining errors are ``inf`` and it is flagged as failed.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    fam, th_star = problem.family, problem.theta_star
    R, p, n, m, w = len(rngs), problem.p, cfg.n, cfg.m, cfg.w
    gens = [(rng.substream(_COV), rng.substream(_REAL_Y), rng.substream(_SYN_Y)) for rng in rngs]

    err = np.full((R, steps + 1), np.inf)
    iters = np.zeros((R, steps + 1), dtype=int)
    conv = np.zeros((R, steps + 1), dtype=bool)
    failed = np.zeros(R, dtype=bool)
    failure = [""] * R

    X0 = np.zeros((R, n, p))
    y0 = np.zeros((R, n))
    for r, (gc, gy, _) in enumerate(gens):
        try:
            X0[r], y0[r] = problem.draw_real(gc, gy, n)
        except PoissonOverflow:
            failed[r] = True
            failure[r] = "PoissonOverflow at t=0"
    theta = np.zeros((R, p))
    live = np.flatnonzero(~failed)
    if live.size:
        theta, failed = _fit_step(fam, X0[live], y0[live], np.full(n, 1.0 / n), theta[live], live,
                                  theta, failed, failure, iters[:, 0], conv[:, 0], t=0)
    err[:, 0] = np.where(failed, np.inf, np.sum((theta - th_star) ** 2, axis=1))

    sw = np.concatenate([np.full(n, w / n), np.full(m, (1.0 - w) / m)])
    for t in range(1, steps + 1):
        live = np.flatnonzero(~failed)
        if live.size == 0:
            break
        X = np.empty((live.size, n + m, p))
        y = np.empty((live.size, n + m))
        ok = np.ones(live.size, dtype=bool)
        for j, r in enumerate(live):
            gc, gy, gs = gens[r]
            try:
                X[j, :n], y[j, :n] = problem.draw_real(gc, gy, n)
                X[j, n:] = problem.draw_covariates(gc, m)
                y[j, n:] = draw_responses(fam, X[j, n:], theta[r], gs)
            except PoissonOverflow:
                ok[j] = False
                failed[r] = True
                failure[r] = f"PoissonOverflow at t={t}"
        live, X, y = live[ok], X[ok], y[ok]
        if live.size == 0:
            break
        theta, failed = _fit_step(fam, X, y, sw, theta[live], live, theta, failed, failure,
                                  iters[:, t], conv[:, t], t=t)
        good = live[~failed[live]]
        err[good, t] = np.sum((theta[good] - th_star) ** 2, axis=1)
    bad = ~np.isfinite(err)
    err[bad] = np.inf
    return GlmBatch(err, iters, conv, failed, failure, theta)


def _fit_step(fam, X, y, sw, init, live, theta, failed, failure, iters_col, conv_col, t):
    """Fit ``live`` chains, retrying failures from a cold start; updates in place."""
    res = fit_weighted_mle_batch(fam, X, y, sw, init)
    retry = np.flatnonzero(~res.converged)
    if retry.size:
        res2 = fit_weighted_mle_batch(fam, X[retry], y[retry], sw, np.zeros((retry.size, init.shape[1])))
        res.theta[retry] = res2.theta
        res.iters[retry] += res2.iters
        res.converged[retry] = res2.converged
        res.singular[retry] = res2.singular
    theta = theta.copy()
    theta[live] = res.theta
    iters_col[live] = res.iters
    conv_col[live] = res.converged
    for j in np.flatnonzero(~res.converged):
        r = live[j]
        failed[r] = True
        failure[r] = f"{'SingularHessian' if res.singular[j] else 'NoConvergence'} at t={t}"
    return theta, failed


def run_glm_chain(problem: GlmProblem, cfg: MixConfig, steps: int, rng: RngStream) -> GlmTrajectory:
    return run_glm_chains(problem, cfg, steps, [rng]).trajectory(0)
