"""Monte Carlo scenarios: weight sweeps, mixing-ratio sweeps and collapse runs.

Replications are split into fixed-size blocks. Each block runs its chains in
lockstep (vectorised over replications) and every replication ``r`` draws
from its own ``RngStream(seed, r)``. Because the block layout depends only
on the config, results are identical whatever the number of worker threads.
The same stream indices are reused at every grid point, so neighbouring grid
points and the two weights of a k-sweep are compared on common random
numbers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from ._version import __version__
from .analytics import naive_weight, optimal_weight
from .cdf import run_cdf_chains
from .config import MixConfig
from .errors import ConfigError, DomainError
from .gaussian import GaussianModel, run_gaussian_chains
from .glm import GlmFamily, GlmProblem, run_glm_chains
from .linalg_stats import RngStream

__all__ = [
    "SCENARIOS",
    "MODELS",
    "ScenarioConfig",
    "SweepPoint",
    "SweepResult",
    "parse_grid",
    "load_config",
    "tail_limit_estimate",
    "simulate_errors",
    "simulate_trajectory",
    "summarize",
    "run_scenario",
    "emit_csv",
    "emit_json",
    "emit_trajectory_csv",
    "CSV_HEADER",
]

SCENARIOS = ("collapse_demo", "golden_sweep", "k_sweep", "adult_study")
MODELS = ("gauss_mean", "gauss_cov", "linear", "logistic", "poisson", "cdf")
CSV_HEADER = ("grid_value", "mean_error", "ci_low", "ci_high", "failed")
Z95 = 1.959963984540054

_GLM_FAMILIES = {
    "linear": GlmFamily.linear,
    "logistic": GlmFamily.logistic,
    "poisson": GlmFamily.poisson,
}


def _default_w_grid():
    return [round(0.2 + 0.02 * i, 10) for i in range(1, 31)]


def _default_k_grid():
    return [round(0.01 + 0.02 * i, 10) for i in range(10)]


def parse_grid(value) -> list[float]:
    """Grid from a list, a scalar, or an inclusive ``"start:step:stop"`` string."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            if "," in value:
                return [float(v) for v in value.split(",") if v.strip()]
            try:
                return [float(value)]
            except ValueError:
                raise ConfigError(f"cannot parse grid {value!r}") from None
        try:
            start, step, stop = (float(s) for s in parts)
        except ValueError:
            raise ConfigError(f"cannot parse grid {value!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"empty grid {value!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse grid {value!r}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "golden_sweep"
    model: str = "gauss_mean"
    n: int = 100
    m: int = 100
    T: int = 200
    replications: int = 2000
    w_grid: tuple = field(default_factory=lambda: tuple(_default_w_grid()))
    k_grid: tuple = field(default_factory=lambda: tuple(_default_k_grid()))
    seed: int = 0
    tail_len: int = 50
    output_path: str = "results.csv"
    p: int = 4
    data_path: str = ""
    block_size: int = 64

    def __post_init__(self):
        object.__setattr__(self, "w_grid", tuple(parse_grid(self.w_grid)))
        object.__setattr__(self, "k_grid", tuple(parse_grid(self.k_grid)))
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("n", "m", "T", "replications", "p", "block_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.n < 2 or self.m < 2:
            raise ConfigError("n and m must be at least 2")
        if not 0 <= self.tail_len < self.T:
            raise ConfigError(f"tail_len must satisfy 0 <= tail_len < T, got {self.tail_len} vs T={self.T}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.w_grid or any(not 0.0 <= w <= 1.0 for w in self.w_grid):
            raise ConfigError("w_grid must be nonempty with values in [0, 1]")
        if not self.k_grid or any(not k > 0 for k in self.k_grid):
            raise ConfigError("k_grid must be nonempty with positive values")
        if self.scenario == "adult_study" and not self.data_path:
            raise ConfigError("adult_study needs data_path")

    @property
    def k(self) -> float:
        return self.n / self.m

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_grid"] = list(self.w_grid)
        d["k_grid"] = list(self.k_grid)
        return d


def load_config(path, **overrides) -> ScenarioConfig:
    """Read a flat YAML mapping of ``ScenarioConfig`` fields."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value mapping")
    raw = dict(raw)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; nested values under {nested}")
    try:
        return ScenarioConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SweepPoint:
    grid_value: float
    mean_error: float
    ci_low: float
    ci_high: float
    failed: int


@dataclass
class SweepResult:
    """Aggregated sweep. ``series`` maps a name to its points; ``samples`` keeps
    the per-replication values (``nan`` where a replication failed)."""

    config: ScenarioConfig
    series: dict
    samples: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def points(self) -> list:
        """Points of the only series; raises if there are several."""
        if len(self.series) != 1:
            raise ValueError(f"result has {len(self.series)} series: {list(self.series)}")
        return next(iter(self.series.values()))

    def argmin(self, name: str | None = None) -> float:
        pts = self.series[name] if name else self.points
        return min(pts, key=lambda pt: pt.mean_error).grid_value

    def failure_rate(self) -> float:
        total = failed = 0
        for name, per_grid in self.samples.items():
            for vals in per_grid:
                total += len(vals)
                failed += int(np.sum(np.isnan(vals)))
        return failed / total if total else 0.0


def tail_limit_estimate(errors, tail_len: int) -> float:
    """Mean of the last ``tail_len + 1`` entries of a length ``T + 1`` trajectory."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or errors.size == 0:
        raise DomainError("errors must be a nonempty 1-D trajectory")
    if tail_len < 0 or tail_len > errors.size - 1:
        raise DomainError(f"tail_len={tail_len} exceeds T={errors.size - 1}")
    return float(np.mean(errors[errors.size - 1 - tail_len:]))


def _tail_rows(errors: np.ndarray, tail_len: int) -> np.ndarray:
    T = errors.shape[1] - 1
    if tail_len > T:
        raise DomainError(f"tail_len={tail_len} exceeds T={T}")
    return errors[:, T - tail_len:].mean(axis=1)


def summarize(grid_value: float, values) -> SweepPoint:
    """Mean and 95% normal-approximation interval; non-finite values count as failed."""
    values = np.asarray(values, dtype=float)
    ok = values[np.isfinite(values)]
    failed = int(values.size - ok.size)
    if ok.size == 0:
        return SweepPoint(float(grid_value), math.inf, math.inf, math.inf, failed)
    mean = float(ok.mean())
    half = Z95 * float(ok.std(ddof=1)) / math.sqrt(ok.size) if ok.size > 1 else 0.0
    return SweepPoint(float(grid_value), mean, mean - half, mean + half, failed)


# ---------------------------------------------------------------------------
# simulation


def simulate_errors(model: str, mix: MixConfig, steps: int, rngs: Sequence[RngStream],
                    p: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Error trajectories ``(R, steps + 1)`` and per-step clamp flags for one model."""
    if model in ("gauss_mean", "gauss_cov"):
        batch = run_gaussian_chains(GaussianModel.isotropic(p), mix, steps, rngs)
        errs = batch.mean_err if model == "gauss_mean" else batch.cov_err
        return errs, batch.clamped
    if model in _GLM_FAMILIES:
        problem = GlmProblem.scenario(_GLM_FAMILIES[model](), p)
        batch = run_glm_chains(problem, mix, steps, rngs)
        return batch.theta_err, np.zeros(batch.theta_err.shape, dtype=bool)
    if model == "cdf":
        errs = run_cdf_chains(mix, steps, rngs).cvm_err
        return errs, np.zeros(errs.shape, dtype=bool)
    raise ConfigError(f"unknown model {model!r}")


def simulate_trajectory(cfg: ScenarioConfig, w: float, replication: int = 0):
    """One chain with stream ``replication``; returns ``(errors, clamped)`` of length ``T + 1``."""
    errs, clamped = simulate_errors(cfg.model, MixConfig(w, cfg.n, cfg.m), cfg.T,
                                    [RngStream(cfg.seed, replication)], cfg.p)
    return errs[0], clamped[0]


def _blocks(cfg: ScenarioConfig):
    R, B = cfg.replications, cfg.block_size
    return [range(start, min(start + B, R)) for start in range(0, R, B)]


def _run_tasks(tasks, threads: int):
    """Evaluate zero-argument callables, results in submission order."""
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda task: task(), tasks))


def _error_matrix(cfg: ScenarioConfig, mixes: Sequence[MixConfig], threads: int) -> list[np.ndarray]:
    """Full trajectories for each MixConfig, replications in index order."""
    blocks = _blocks(cfg)

    def task(mix, block):
        return lambda: simulate_errors(cfg.model, mix, cfg.T,
                                       [RngStream(cfg.seed, r) for r in block], cfg.p)[0]

    out = _run_tasks([task(mix, b) for mix in mixes for b in blocks], threads)
    nb = len(blocks)
    return [np.concatenate(out[i * nb:(i + 1) * nb]) for i in range(len(mixes))]


def _tails(cfg: ScenarioConfig, errors: np.ndarray) -> np.ndarray:
    tails = _tail_rows(errors, cfg.tail_len)
    return np.where(np.isfinite(tails), tails, np.nan)


def _golden_sweep(cfg: ScenarioConfig, threads: int) -> SweepResult:
    mixes = [MixConfig(w, cfg.n, cfg.m) for w in cfg.w_grid]
    tails = [_tails(cfg, e) for e in _error_matrix(cfg, mixes, threads)]
    pts = [summarize(w, v) for w, v in zip(cfg.w_grid, tails)]
    return SweepResult(cfg, {"error": pts}, {"error": tails})


def _k_sweep(cfg: ScenarioConfig, threads: int) -> SweepResult:
    ms = [max(2, int(round(cfg.n / k))) for k in cfg.k_grid]
    mixes = []
    for k, m in zip(cfg.k_grid, ms):
        mixes.append(MixConfig(optimal_weight(k), cfg.n, m))
        mixes.append(MixConfig(naive_weight(k), cfg.n, m))
    tails = [_tails(cfg, e) for e in _error_matrix(cfg, mixes, threads)]
    opt, naive = tails[0::2], tails[1::2]
    series = {
        "optimal": [summarize(k, v) for k, v in zip(cfg.k_grid, opt)],
        "naive": [summarize(k, v) for k, v in zip(cfg.k_grid, naive)],
    }
    # paired differences on common random numbers
    diff = [a - b for a, b in zip(opt, naive)]
    series["difference"] = [summarize(k, v) for k, v in zip(cfg.k_grid, diff)]
    extras = {
        "m_values": ms,
        "w_optimal": [mx.w for mx in mixes[0::2]],
        "w_naive": [mx.w for mx in mixes[1::2]],
    }
    return SweepResult(cfg, series, {"optimal": opt, "naive": naive}, extras)


def _collapse_demo(cfg: ScenarioConfig, threads: int) -> SweepResult:
    mixes = [MixConfig(w, cfg.n, cfg.m) for w in cfg.w_grid]
    series, samples = {}, {}
    for w, errs in zip(cfg.w_grid, _error_matrix(cfg, mixes, threads)):
        name = f"w={w:g}"
        vals = [np.where(np.isfinite(errs[:, t]), errs[:, t], np.nan) for t in range(cfg.T + 1)]
        series[name] = [summarize(t, v) for t, v in enumerate(vals)]
        samples[name] = vals
    return SweepResult(cfg, series, samples)


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> SweepResult:
    """Run the scenario named in ``cfg``; see the module docstring for seeding."""
    if cfg.scenario == "golden_sweep":
        return _golden_sweep(cfg, threads)
    if cfg.scenario == "k_sweep":
        return _k_sweep(cfg, threads)
    if cfg.scenario == "collapse_demo":
        return _collapse_demo(cfg, threads)
    if cfg.scenario == "adult_study":
        from .adult import load_adult, run_adult_study
        return run_adult_study(cfg, load_adult(cfg.data_path), threads=threads)
    raise ConfigError(f"unknown scenario {cfg.scenario!r}")


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _series_path(path: Path, name: str, multi: bool) -> Path:
    if not multi:
        return path
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
    return path.with_name(f"{path.stem}_{safe}{path.suffix or '.csv'}")


def _write_points(points, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_HEADER)
        for pt in points:
            out.writerow([_fmt(pt.grid_value), _fmt(pt.mean_error), _fmt(pt.ci_low),
                          _fmt(pt.ci_high), _fmt(pt.failed)])


def emit_csv(results, path) -> list[Path]:
    """Write points as CSV.

    ``results`` is either a sequence of ``SweepPoint`` (one file at ``path``)
    or a ``SweepResult``; a result with several series gets one file per
    series, named ``<stem>_<series>.csv``. Returns the paths written.
    """
    path = Path(path)
    if isinstance(results, SweepResult):
        multi = len(results.series) > 1
        written = []
        for name, pts in results.series.items():
            target = _series_path(path, name, multi)
            _write_points(pts, target)
            written.append(target)
        return written
    _write_points(list(results), path)
    return [path]


def emit_json(results, path) -> Path:
    """Write the result with a metadata block (config echo, seed, version)."""
    path = Path(path)
    if isinstance(results, SweepResult):
        meta = {"config": results.config.to_dict(), "seed": results.config.seed,
                "version": f"v{__version__}"}
        series = {name: [asdict(pt) for pt in pts] for name, pts in results.series.items()}
        doc = {"metadata": meta, "series": series, "extras": _jsonable(results.extras)}
    else:
        doc = {"metadata": {"version": f"v{__version__}"},
               "series": {"error": [asdict(pt) for pt in results]}}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def emit_trajectory_csv(errors, clamped, path) -> Path:
    """``t,error,clamped`` rows for one chain."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("t", "error", "clamped"))
        for t, (e, c) in enumerate(zip(errors, clamped)):
            out.writerow((t, _fmt(e), int(bool(c))))
    return path
