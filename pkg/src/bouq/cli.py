"""Command-line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure,
3 partial results (some rows or repetitions failed).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import calibration, coverage, designs, uq
from .abo import (POLICIES, StopAfter, StopAny, StopNoImprovement, run_abo, trace_header,
                  trace_rows)
from .config import ConfigError, ExperimentConfig, load_config
from .gp import Dataset, DuplicatePointError, NumericalError, derive_seed, fit
from .io import CsvFormatError, read_numeric_csv, write_csv
from .kernels import KernelError
from .objectives import OBJECTIVES, get_objective

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    def globals_(default_seed, default_threads):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=default_seed, help="override the configured seed")
        g.add_argument("--threads", type=int, default=default_threads, help="worker threads (default 1)")
        return g

    # subcommands repeat the global flags without clobbering values given before them
    common = globals_(argparse.SUPPRESS, argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="bouq", parents=[globals_(None, 1)],
                                 description="Uncertainty quantification for Bayesian optimisation.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", parents=[common], help="Monte Carlo estimates of H")
    c.add_argument("--manifest", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--tables", default="", help="comma-separated table labels to keep")

    v = sub.add_parser("coverage", parents=[common], help="coverage study of the two intervals")
    v.add_argument("--config", required=True)
    v.add_argument("--out", required=True)

    u = sub.add_parser("upper-cl", parents=[common], help="upper confidence limits at query points")
    u.add_argument("--config", required=True)
    u.add_argument("--data", required=True, help="CSV rows x1..xp,y")
    u.add_argument("--query", required=True, help="CSV rows x1..xp")
    u.add_argument("--out", required=True)

    o = sub.add_parser("optimize", parents=[common], help="run BO on a built-in objective")
    o.add_argument("--config", required=True)
    o.add_argument("--objective", required=True, help=f"one of {', '.join(OBJECTIVES)}")
    o.add_argument("--out-prefix", required=True)
    o.add_argument("--knn-json", action="store_true", help="also write a k-NN region summary")
    return ap


def cmd_calibrate(args) -> int:
    tables = {t.strip() for t in args.tables.split(",") if t.strip()} or None
    rows = calibration.read_manifest(args.manifest, seed=args.seed, tables=tables)
    comments = {"manifest": Path(args.manifest).name, "rows": len(rows)}
    if args.seed is not None:
        comments["seed"] = args.seed
    _, failures = calibration.calibration_suite([r.config for r in rows], args.out,
                                                threads=args.threads, comments=comments)
    if failures and failures == len(rows):
        return EXIT_NUMERICAL
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_coverage(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    _, _, failed = coverage.coverage_experiment(cfg, args.out, threads=args.threads)
    if failed and failed == cfg.n_repetitions * len(cfg.nu_values()):
        return EXIT_NUMERICAL
    return EXIT_PARTIAL if failed else EXIT_OK


def _candidates(cfg: ExperimentConfig) -> np.ndarray:
    """Candidate set: a tensor mesh for p <= 2, a Halton set otherwise."""
    if cfg.p <= 2:
        pts = designs.grid_mesh(cfg.grid_per_dim, cfg.p)
    else:
        pts = designs.halton(cfg.random_candidates, cfg.p)
    return designs.map_to_domain(pts, cfg.domain).points


def cmd_upper_cl(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    p = cfg.p
    _, data = read_numeric_csv(args.data, expected_cols=p + 1)
    _, query = read_numeric_csv(args.query, expected_cols=p)
    if not data:
        raise CsvFormatError(f"{args.data}: need at least one data row")
    data = np.asarray(data, dtype=float)
    kernel = cfg.kernel()
    post = fit(kernel, Dataset(data[:, :p], data[:, p]), cfg.domain)
    consts = uq.UqConstants.from_kernel(kernel, cfg.domain, alpha=cfg.alpha, c0=cfg.c0)
    rows = []
    if query:
        Q = np.asarray(query, dtype=float)
        mu, s, ucl = uq.upper_cl_parts(Q, consts, post)
        rows = [[*map(float, q), float(m), float(sd), float(u)] for q, m, sd, u in zip(Q, mu, s, ucl)]
    header = [f"x{i + 1}" for i in range(p)] + ["mu", "s", "upper_cl"]
    write_csv(args.out, header, rows, cfg.resolved())
    return EXIT_OK


def _stop_rule(cfg: ExperimentConfig):
    budget = StopAfter(cfg.iterations)
    if cfg.stop == "budget":
        return budget
    return StopAny([StopNoImprovement(cfg.window, cfg.epsilon), budget])


def cmd_optimize(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    if cfg.policy not in POLICIES:
        raise ConfigError(f"unknown policy {cfg.policy!r}; available: {', '.join(POLICIES)}")
    kernel = cfg.kernel()
    domain = cfg.domain
    try:
        objective = get_objective(args.objective, kernel, domain, derive_seed(cfg.seed, 0))
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc
    cands = _candidates(cfg)
    lhs = designs.latin_hypercube(cfg.n_initial, cfg.p, np.random.default_rng(derive_seed(cfg.seed, 1)),
                                  cfg.lhs_candidates)
    init = designs.map_to_domain(lhs, domain).points
    kw = dict(polish_budget=cfg.polish_budget)
    if cfg.policy == "ucb":
        policy = POLICIES["ucb"](init, cands, beta=cfg.beta, delta=cfg.beta_delta, **kw)
    elif cfg.policy == "pes":
        policy = POLICIES["pes"](init, cands, n_features=cfg.n_features, **kw)
    else:
        policy = POLICIES[cfg.policy](init, cands, **kw)
    # the initial design is iteration 1, acquisitions follow
    info = run_abo(policy, _stop_rule(cfg), objective, kernel, domain,
                   seed=derive_seed(cfg.seed, 2), hard_cap=cfg.hard_cap)

    prefix = args.out_prefix
    comments = dict(cfg.resolved())
    comments["objective"] = args.objective
    comments["truncated"] = info.truncated
    write_csv(f"{prefix}_trace.csv", trace_header(cfg.p), trace_rows(info, policy.name), comments)

    post = fit(kernel, info.dataset())
    consts = uq.UqConstants.from_kernel(kernel, domain, alpha=cfg.alpha, c0=cfg.c0)
    region_pts = np.vstack([cands, info.X])
    out = uq.quantify(post, consts, region_pts, domain, polish=cfg.polish_budget > 0)
    xs = [f"x{i + 1}" for i in range(cfg.p)]
    write_csv(f"{prefix}_region.csv", xs + ["in_region"],
              ([*map(float, x), bool(m)] for x, m in zip(region_pts, out.region_mask)), comments)
    write_csv(f"{prefix}_interval.csv", ["method", "lo", "hi", "best_observed", *xs],
              [["ci_seq", *map(float, out.interval), out.best_observed, *map(float, out.argbest)],
               ["ci_naive", *map(float, out.naive_interval), out.best_observed,
                *map(float, out.argbest)]],
              comments)
    if args.knn_json:
        knn = uq.region_knn_summary(region_pts, out.region_mask, cfg.knn_k)
        Path(f"{prefix}_region_knn.json").write_text(knn.to_json() + "\n")
    return EXIT_OK


COMMANDS = {"calibrate": cmd_calibrate, "coverage": cmd_coverage,
            "upper-cl": cmd_upper_cl, "optimize": cmd_optimize}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("bouq: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"bouq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, CsvFormatError, DuplicatePointError, KernelError, ValueError, OSError) as exc:
        print(f"bouq: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
