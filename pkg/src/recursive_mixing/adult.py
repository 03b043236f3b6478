"""UCI Adult census data: loading and the recursive-training study on it.

Columns are matched by name after normalising headers (lowercase, ``-`` and
spaces to ``_``), so column order in the file does not matter. Rows with a
``?`` or empty cell are dropped. The five numeric features are standardised
to zero mean and unit variance, and ``income`` becomes a 0/1 label.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cdf import cvm_discrete_baseline, run_categorical_chains
from .config import MixConfig
from .errors import DataError, MissingColumn, UnparseableRow
from .glm import GlmFamily, fit_weighted_mle_batch, run_glm_chains
from .harness import ScenarioConfig, SweepResult, _blocks, _run_tasks, _tails, summarize
from .linalg_stats import RngStream

__all__ = [
    "NUMERIC_FEATURES",
    "CATEGORICAL_FEATURES",
    "AdultData",
    "load_adult",
    "EmpiricalLogisticProblem",
    "fit_theta_star",
    "run_adult_study",
]

NUMERIC_FEATURES = ("age", "education_num", "capital_gain", "capital_loss", "hours_per_week")
CATEGORICAL_FEATURES = ("workclass", "education", "marital_status")
LABEL = "income"


@dataclass
class AdultData:
    features: np.ndarray        # (N, 5), standardised
    labels: np.ndarray          # (N,), 0/1
    categories: dict            # name -> (codes, levels)
    feature_means: np.ndarray
    feature_scales: np.ndarray

    def __len__(self):
        return self.labels.size

    def design(self) -> np.ndarray:
        """Features with a leading intercept column."""
        return np.column_stack([np.ones(len(self)), self.features])

    def pmf(self, column: str) -> np.ndarray:
        codes, levels = self.categories[column]
        return np.bincount(codes, minlength=len(levels)) / codes.size


def _norm(name: str) -> str:
    return name.strip().lower().replace("-", "_").replace(" ", "_")


def _label(raw: str, line: int) -> int:
    v = raw.strip().rstrip(".").replace(" ", "")
    if v == ">50K":
        return 1
    if v == "<=50K":
        return 0
    raise UnparseableRow(line, f"income value {raw!r} is neither '>50K' nor '<=50K'")


def load_adult(path) -> AdultData:
    """Parse an Adult CSV with a header row; see the module docstring."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        index = {_norm(h): i for i, h in enumerate(header)}
        needed = NUMERIC_FEATURES + CATEGORICAL_FEATURES + (LABEL,)
        for col in needed:
            if col not in index:
                raise MissingColumn(f"column {col!r} not found in header {header}")

        numeric, labels = [], []
        cats = {c: [] for c in CATEGORICAL_FEATURES}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise UnparseableRow(line, f"expected {len(header)} fields, found {len(row)}")
            cells = [cell.strip() for cell in row]
            if any(cell in ("?", "") for cell in cells):
                continue
            try:
                numeric.append([float(cells[index[c]]) for c in NUMERIC_FEATURES])
            except ValueError as exc:
                raise UnparseableRow(line, str(exc)) from None
            labels.append(_label(cells[index[LABEL]], line))
            for c in CATEGORICAL_FEATURES:
                cats[c].append(cells[index[c]])

    if not labels:
        raise DataError(f"{path} has no complete rows")
    X = np.asarray(numeric, dtype=float)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    categories = {}
    for c, values in cats.items():
        levels, codes = np.unique(np.asarray(values), return_inverse=True)
        categories[c] = (codes, [str(v) for v in levels])
    return AdultData((X - mean) / scale, np.asarray(labels, dtype=float), categories, mean, scale)


class EmpiricalLogisticProblem:
    """Logistic recursion on a fixed table.

    Real pairs are rows resampled with replacement, labels included.
    Synthetic covariates are resampled rows too; their responses come from
    the previous fit.
    """

    def __init__(self, design: np.ndarray, labels: np.ndarray, theta_star: np.ndarray):
        self.family = GlmFamily.logistic()
        self.design = np.asarray(design, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.theta_star = np.asarray(theta_star, dtype=float)

    @property
    def p(self) -> int:
        return self.theta_star.size

    def draw_covariates(self, gen: np.random.Generator, count: int) -> np.ndarray:
        return self.design[gen.integers(0, self.labels.size, count)]

    def draw_real(self, gen_x, gen_y, count: int):
        rows = gen_x.integers(0, self.labels.size, count)
        return self.design[rows], self.labels[rows]


def fit_theta_star(data: AdultData) -> np.ndarray:
    """Logistic MLE on the whole table (with intercept)."""
    X = data.design()
    res = fit_weighted_mle_batch(GlmFamily.logistic(), X[None], data.labels[None],
                                 np.full(len(data), 1.0 / len(data)), np.zeros((1, X.shape[1])))
    if not res.converged[0]:
        raise DataError("logistic fit on the full dataset did not converge")
    return res.theta[0]


def run_adult_study(cfg: ScenarioConfig, data: AdultData, threads: int = 1,
                    categorical: Sequence[str] = CATEGORICAL_FEATURES) -> SweepResult:
    """Sweep ``cfg.w_grid`` on the logistic task and on each categorical column.

    Series ``"logistic"`` holds tail-averaged ``||theta_t - theta*||^2``;
    series ``"categorical_<col>"`` holds the tail-averaged discrete CvM error
    against the full-table pmf of that column.
    """
    theta_star = fit_theta_star(data)
    problem = EmpiricalLogisticProblem(data.design(), data.labels, theta_star)
    blocks = _blocks(cfg)

    def logistic_task(w, block):
        return lambda: run_glm_chains(problem, MixConfig(w, cfg.n, cfg.m), cfg.T,
                                      [RngStream(cfg.seed, r) for r in block]).theta_err

    def categorical_task(pmf, w, block):
        return lambda: run_categorical_chains(pmf, MixConfig(w, cfg.n, cfg.m), cfg.T,
                                              [RngStream(cfg.seed, r) for r in block])

    series, samples = {}, {}
    jobs = [("logistic", None)] + [(f"categorical_{c}", data.pmf(c)) for c in categorical]
    for name, pmf in jobs:
        tasks = []
        for w in cfg.w_grid:
            for b in blocks:
                tasks.append(logistic_task(w, b) if pmf is None else categorical_task(pmf, w, b))
        out = _run_tasks(tasks, threads)
        nb = len(blocks)
        tails = [_tails(cfg, np.concatenate(out[i * nb:(i + 1) * nb])) for i in range(len(cfg.w_grid))]
        series[name] = [summarize(w, v) for w, v in zip(cfg.w_grid, tails)]
        samples[name] = tails

    extras = {
        "theta_star": theta_star.tolist(),
        "rows": len(data),
        "categorical_baseline": {c: cvm_discrete_baseline(data.pmf(c), cfg.n) for c in categorical},
    }
    return SweepResult(cfg, series, samples, extras)
