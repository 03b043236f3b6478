"""Command line entry point: ``recursive-mixing <command> [options]``.

Exit codes: 0 success, 2 bad configuration, 3 bad data file, 4 more than
half of the replications failed numerically.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import analytics as an
from ._version import __version__
from .errors import ConfigError, DataError, DomainError
from .harness import (
    MODELS,
    ScenarioConfig,
    emit_csv,
    emit_json,
    emit_trajectory_csv,
    load_config,
    parse_grid,
    run_scenario,
    simulate_trajectory,
)

log = logging.getLogger("recursive_mixing")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FAILURES = 0, 2, 3, 4


def _global_flags(parser: argparse.ArgumentParser, default):
    parser.add_argument("--seed", type=int, default=default, help="base seed of all random streams")
    parser.add_argument("--threads", type=int, default=default, help="worker threads (default 1)")
    parser.add_argument("--out", default=default, help="output path")
    parser.add_argument("--config", default=default, help="flat YAML file of scenario fields")


def _size_flags(parser, T=None):
    parser.add_argument("--model", choices=MODELS)
    parser.add_argument("--n", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--T", type=int, default=T)
    parser.add_argument("--p", type=int, help="dimension for Gaussian and GLM models")


def _sweep_flags(parser):
    parser.add_argument("--replications", "-R", type=int)
    parser.add_argument("--tail-len", type=int, dest="tail_len")
    parser.add_argument("--block-size", type=int, dest="block_size")
    parser.add_argument("--w-grid", dest="w_grid", help="'start:step:stop' or comma list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recursive-mixing",
                                     description="Recursive training on mixed real and synthetic data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s v{__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, None)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one chain, full trajectory as CSV")
    _size_flags(p)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--replication", type=int, default=0, help="stream index of the chain")

    p = sub.add_parser("sweep", parents=[common], help="weight sweep or mixing-ratio sweep")
    p.add_argument("--scenario", choices=("golden_sweep", "k_sweep"))
    _size_flags(p)
    _sweep_flags(p)
    p.add_argument("--k-grid", dest="k_grid")

    p = sub.add_parser("collapse-demo", parents=[common], help="mean error per step at fixed weights")
    _size_flags(p)
    _sweep_flags(p)

    p = sub.add_parser("analyze", parents=[common], help="closed-form tables")
    p.add_argument("--by", choices=("w", "k"), default="w",
                   help="tabulate over the weight grid (fixed n, m) or the k grid (fixed n)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--w-grid", dest="w_grid", default="0.02:0.02:1.0")
    p.add_argument("--k-grid", dest="k_grid", default="0.01:0.02:0.19")
    p.add_argument("--tr-sigma", type=float, default=1.0)
    p.add_argument("--tr-sigma-sq", type=float, default=0.25)

    p = sub.add_parser("adult", parents=[common], help="weight sweep on the Adult census data")
    p.add_argument("--data", dest="data_path", required=True, help="path to the Adult CSV")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--T", type=int, default=100)
    _sweep_flags(p)
    return parser


_FIELDS = ("model", "n", "m", "T", "p", "replications", "tail_len", "block_size",
           "w_grid", "k_grid", "seed", "data_path", "scenario")


def _scenario_config(args, scenario: str, **defaults) -> ScenarioConfig:
    overrides = {f: getattr(args, f, None) for f in _FIELDS}
    overrides["scenario"] = overrides["scenario"] or scenario
    if args.out:
        overrides["output_path"] = args.out
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        vals = dict(defaults)
        vals.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ScenarioConfig(**vals)
    return cfg


def _write_result(result, out: str) -> None:
    path = Path(out)
    for written in emit_csv(result, path):
        log.info("wrote %s", written)
    emit_json(result, path.with_suffix(".json"))


def _report(result, stream=None) -> None:
    stream = stream or sys.stdout
    for name, pts in result.series.items():
        finite = [pt for pt in pts if pt.mean_error == pt.mean_error]
        if not finite:
            continue
        best = min(finite, key=lambda pt: pt.mean_error)
        failed = sum(pt.failed for pt in pts)
        print(f"{name}: {len(pts)} points, min mean_error {best.mean_error:.6g} "
              f"at {best.grid_value:g}, failed replications {failed}", file=stream)


def _finish(result) -> int:
    rate = result.failure_rate()
    if rate > 0.5:
        print(f"error: {rate:.0%} of replications failed", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _scenario_config(args, "collapse_demo", T=200, tail_len=0)
    errors, clamped = simulate_trajectory(cfg, args.w, args.replication)
    out = args.out or "-"
    if out == "-":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(("t", "error", "clamped"))
        for t, (e, c) in enumerate(zip(errors, clamped)):
            writer.writerow((t, repr(float(e)), int(bool(c))))
    else:
        emit_trajectory_csv(errors, clamped, out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _scenario_config(args, "golden_sweep")
    result = run_scenario(cfg, threads=args.threads or 1)
    _write_result(result, cfg.output_path)
    _report(result)
    return _finish(result)


def cmd_collapse(args) -> int:
    if getattr(args, "w_grid", None) is None and not args.config:
        args.w_grid = "0"
    cfg = _scenario_config(args, "collapse_demo", T=1000, replications=1000, tail_len=0)
    result = run_scenario(cfg, threads=args.threads or 1)
    _write_result(result, cfg.output_path)
    for name, pts in result.series.items():
        print(f"{name}: t=1 {pts[1].mean_error:.6g}, t={cfg.T} {pts[-1].mean_error:.6g}")
    return _finish(result)


def _analyze_rows(args):
    if args.by == "w":
        n, m = args.n, args.m
        k = n / m
        yield ("w", "c_factor", "mean_limit", "cov_limit", "cdf_limit", "cov_regime", "cdf_regime")
        for w in parse_grid(args.w_grid):
            if not 0 < w <= 1:
                raise ConfigError(f"w={w} outside (0, 1]")
            yield (w, an.c_factor(w, k), an.gaussian_mean_limit(w, k, n, args.tr_sigma),
                   an.gaussian_cov_limit_finite(w, n, m, args.tr_sigma, args.tr_sigma_sq),
                   an.cdf_limit_error(w, n, m),
                   an.classify_regime("gaussian_cov", w, n, m, args.tr_sigma, args.tr_sigma_sq).value,
                   an.classify_regime("cdf", w, n, m).value)
    else:
        n = args.n
        yield ("k", "m", "w_optimal", "w_naive", "c_optimal", "c_naive")
        for k in parse_grid(args.k_grid):
            ws, w0 = an.optimal_weight(k), an.naive_weight(k)
            yield (k, max(2, round(n / k)), ws, w0, an.c_factor(ws, k), an.c_factor(w0, k))


def cmd_analyze(args) -> int:
    try:
        rows = list(_analyze_rows(args))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_adult(args) -> int:
    cfg = _scenario_config(args, "adult_study", model="logistic", n=500, m=500, T=100)
    result = run_scenario(cfg, threads=args.threads or 1)
    _write_result(result, cfg.output_path)
    _report(result)
    return _finish(result)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "collapse-demo": cmd_collapse,
    "analyze": cmd_analyze,
    "adult": cmd_adult,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
