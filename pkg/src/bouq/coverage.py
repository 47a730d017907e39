"""Frequentist coverage study of the sequential interval against the naive one.

Per repetition: simulate a process realisation on a tensor mesh, start UCB
from a maximin LHS snapped to the mesh, and at each checkpoint build both
intervals for the mesh maximum.  Everything lives on the mesh, so the
realisation is known exactly wherever the optimiser looks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import designs, uq
from .abo import Information, StopAfter, UcbPolicy, run_abo
from .config import ExperimentConfig
from .gp import NumericalError, derive_seed, fit, simulate_on_grid
from .io import write_csv

CI_SEQ = "ci_seq"
CI_NAIVE = "ci_naive"
COVERAGE_HEADER = ["nu", "iterations", "method", "coverage_rate", "mean_width", "n_runs"]


@dataclass
class CheckpointResult:
    iterations: int
    method: str
    lo: float
    hi: float
    covered: bool

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class RepetitionResult:
    nu: float | None
    repetition: int
    f_max: float
    info: Information | None = None
    checkpoints: list = field(default_factory=list)
    error: str = ""


def snap_to_mesh(points01: np.ndarray, per_dim: int) -> np.ndarray:
    """Mesh indices nearest to unit-cube points, distinct (collisions move to the
    nearest free node)."""
    p = points01.shape[1]
    nodes = designs.grid_mesh(per_dim, p).points
    taken, out = set(), []
    for x in points01:
        d2 = ((nodes - x) ** 2).sum(axis=1)
        for idx in np.argsort(d2, kind="stable"):
            if int(idx) not in taken:
                taken.add(int(idx))
                out.append(int(idx))
                break
    return np.array(out)


def mesh_index(x01: np.ndarray, per_dim: int) -> int:
    ijk = np.rint(np.asarray(x01) * (per_dim - 1)).astype(int)
    return int(np.ravel_multi_index(tuple(ijk), (per_dim,) * len(ijk)))


def _seed(cfg: ExperimentConfig, nu_index: int, rep: int, stream: int):
    return derive_seed(cfg.seed, nu_index, rep, stream)


def checkpoint_intervals(info: Information, kernel, consts: uq.UqConstants, grid: np.ndarray,
                         n_initial_batches: int, iterations: int):
    """Both intervals after ``iterations`` acquisition steps (candidates = grid)."""
    post = fit(kernel, info.prefix(n_initial_batches + iterations).dataset())
    seq = uq.confidence_interval(consts, post, grid, polish=False)
    naive = uq.naive_interval(post, grid, polish=False)
    return seq, naive


def coverage_repetition(cfg: ExperimentConfig, nu_index: int, rep: int) -> RepetitionResult:
    nu = cfg.nu_values()[nu_index]
    kernel = cfg.kernel(nu)
    domain = cfg.domain
    mesh01 = designs.grid_mesh(cfg.grid_per_dim, cfg.p)
    grid = designs.map_to_domain(mesh01, domain).points
    truth = simulate_on_grid(kernel, grid, _seed(cfg, nu_index, rep, 0))
    f_max = float(truth.max())

    lhs = designs.latin_hypercube(cfg.n_initial, cfg.p, np.random.default_rng(_seed(cfg, nu_index, rep, 1)),
                                  cfg.lhs_candidates)
    init = grid[snap_to_mesh(lhs.points, cfg.grid_per_dim)]

    def objective(x):
        return truth[mesh_index((x - np.asarray(domain.lower)) / domain.width, cfg.grid_per_dim)]

    policy = UcbPolicy(init, grid, beta=cfg.beta, delta=cfg.beta_delta, polish_budget=0)
    last = max(cfg.checkpoints)
    info = run_abo(policy, StopAfter(1 + last), objective, kernel, domain,
                   seed=_seed(cfg, nu_index, rep, 2))
    consts = uq.UqConstants.from_kernel(kernel, domain, alpha=cfg.alpha, c0=cfg.c0)
    res = RepetitionResult(nu, rep, f_max, info)
    for k in sorted(cfg.checkpoints):
        (lo, hi), (glo, ghi) = checkpoint_intervals(info, kernel, consts, grid, 1, k)
        res.checkpoints.append(CheckpointResult(k, CI_SEQ, lo, hi, lo <= f_max <= hi))
        res.checkpoints.append(CheckpointResult(k, CI_NAIVE, glo, ghi, glo <= f_max <= ghi))
    return res


def _safe_repetition(args):
    cfg, nu_index, rep = args
    try:
        return coverage_repetition(cfg, nu_index, rep)
    except (NumericalError, ValueError, RuntimeError) as exc:
        return RepetitionResult(cfg.nu_values()[nu_index], rep, float("nan"), error=str(exc))


def run_repetitions(cfg: ExperimentConfig, threads: int = 1) -> list[RepetitionResult]:
    jobs = [(cfg, i, r) for i in range(len(cfg.nu_values())) for r in range(cfg.n_repetitions)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(_safe_repetition, jobs))
    else:
        results = [_safe_repetition(j) for j in jobs]
    return sorted(results, key=lambda r: (cfg.nu_values().index(r.nu), r.repetition))


def summarize(cfg: ExperimentConfig, results: list[RepetitionResult]) -> list[list]:
    """Rows ``(nu, iterations, method, coverage_rate, mean_width, n_runs)``."""
    rows = []
    for nu in cfg.nu_values():
        ok = [r for r in results if r.nu == nu and not r.error]
        for k in sorted(cfg.checkpoints):
            for method in (CI_SEQ, CI_NAIVE):
                cps = [c for r in ok for c in r.checkpoints if c.iterations == k and c.method == method]
                if not cps:
                    rows.append(["" if nu is None else nu, k, method, float("nan"), float("nan"), 0])
                    continue
                rate = sum(c.covered for c in cps) / len(cps)
                width = float(np.mean([c.width for c in cps]))
                rows.append(["" if nu is None else nu, k, method, rate, width, len(cps)])
    return rows


def coverage_experiment(cfg: ExperimentConfig, out=None, threads: int = 1):
    """Run the study, optionally write the CSV, return (rows, results, n_failed)."""
    results = run_repetitions(cfg, threads)
    rows = summarize(cfg, results)
    failed = sum(1 for r in results if r.error)
    if out is not None:
        comments = dict(cfg.resolved())
        comments["failed_repetitions"] = failed
        write_csv(out, COVERAGE_HEADER, rows, comments)
    return rows, results, failed
