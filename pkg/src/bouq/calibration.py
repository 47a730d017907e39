"""Monte Carlo calibration of the universal constant.

For a kernel/design configuration on ``[0, 1]^p`` we estimate

    H = E[M1] / sqrt(p * max(1, log(A0 * D)))

where ``M1`` is the normalised prediction error maximised over a Halton grid.
Each replication draws a design, simulates the process jointly on
design and grid, fits on the design and evaluates ``M1`` on the grid.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import designs
from .gp import Dataset, NumericalError, derive_seed, fit, simulate_on_grid, sup_statistic_m
from .io import write_csv
from .kernels import Domain, ProductKernel, kernel_for_target

MAXIMIN_LHS = "maximin_lhs"
UNIFORM = "uniform"
DESIGN_KINDS = (MAXIMIN_LHS, UNIFORM)

DEFAULT_GRID = {1: 100, 2: 1000, 3: 2000}
DEFAULT_REPS = {1: 1000, 2: 100, 3: 100}

SUITE_HEADER = ["family", "nu", "p", "n_design", "a0_d_omega", "design_kind",
                "h_estimate", "mc_se", "n_reps", "seed", "error"]


@dataclass(frozen=True)
class CalibrationConfig:
    p: int
    family: str
    nu: float | None
    a0_d_omega: float
    n_design: int
    design_kind: str = MAXIMIN_LHS
    grid_size: int | None = None
    n_replications: int | None = None
    seed: int = 0
    maximin_candidates: int = 1000
    fixed_design: bool = False

    def __post_init__(self):
        if self.design_kind not in DESIGN_KINDS:
            raise ValueError(f"design_kind must be one of {DESIGN_KINDS}")
        if self.p < 1 or self.n_design < 2:
            raise ValueError("need p >= 1 and n_design >= 2")
        if self.grid_size is None:
            object.__setattr__(self, "grid_size", DEFAULT_GRID.get(self.p, 2000))
        if self.n_replications is None:
            object.__setattr__(self, "n_replications", DEFAULT_REPS.get(self.p, 100))

    @property
    def domain(self) -> Domain:
        return Domain.unit(self.p)

    def kernel(self) -> ProductKernel:
        return kernel_for_target(self.family, self.nu, self.a0_d_omega, self.domain)

    def normalizer(self) -> float:
        return math.sqrt(self.p * max(1.0, math.log(self.a0_d_omega)))


@dataclass
class CalibrationRecord:
    config: CalibrationConfig
    h_estimate: float
    mc_standard_error: float
    m_values: np.ndarray = field(repr=False)

    @property
    def n_reps(self) -> int:
        return len(self.m_values)


def draw_design(cfg: CalibrationConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.design_kind == MAXIMIN_LHS:
        return designs.latin_hypercube(cfg.n_design, cfg.p, rng, cfg.maximin_candidates).points
    return designs.uniform_random(cfg.n_design, cfg.p, rng).points


def m1_replication(kernel: ProductKernel, design: np.ndarray, grid: np.ndarray, seed) -> float:
    """One draw of ``M1``: joint simulation, fit on the design, sup over the grid."""
    n = design.shape[0]
    z = simulate_on_grid(kernel, np.vstack([design, grid]), seed)
    post = fit(kernel, Dataset(design, z[:n]))
    return sup_statistic_m(post, z[n:], grid)


def _replication_seed(seed, rep: int, stream: int) -> np.random.SeedSequence:
    return derive_seed(seed, rep, stream)


def estimate_h(cfg: CalibrationConfig, threads: int = 1) -> CalibrationRecord:
    """Monte Carlo estimate of H; deterministic given ``cfg.seed``."""
    kernel = cfg.kernel()
    grid = designs.halton(cfg.grid_size, cfg.p).points
    fixed = draw_design(cfg, np.random.default_rng(_replication_seed(cfg.seed, 0, 0))) \
        if cfg.fixed_design else None

    def one(rep: int) -> float:
        design = fixed if fixed is not None else \
            draw_design(cfg, np.random.default_rng(_replication_seed(cfg.seed, rep, 0)))
        try:
            return m1_replication(kernel, design, grid, _replication_seed(cfg.seed, rep, 1))
        except NumericalError as exc:
            raise NumericalError(f"replication {rep}: {exc}") from exc

    reps = range(cfg.n_replications)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            m = np.array(list(pool.map(one, reps)))
    else:
        m = np.array([one(r) for r in reps])
    norm_ = cfg.normalizer()
    h = math.fsum(m) / len(m) / norm_
    se = float(np.std(m, ddof=1) / math.sqrt(len(m)) / norm_) if len(m) > 1 else math.nan
    return CalibrationRecord(cfg, h, se, m)


def _suite_row(cfg: CalibrationConfig, rec: CalibrationRecord | None, err: str = "") -> list:
    nu = "" if cfg.nu is None else cfg.nu
    if rec is None:
        return [cfg.family, nu, cfg.p, cfg.n_design, float(cfg.a0_d_omega), cfg.design_kind,
                "", "", cfg.n_replications, cfg.seed, err]
    return [cfg.family, nu, cfg.p, cfg.n_design, float(cfg.a0_d_omega), cfg.design_kind,
            rec.h_estimate, rec.mc_standard_error, rec.n_reps, cfg.seed, ""]


def calibration_suite(rows: list[CalibrationConfig], out=None, threads: int = 1,
                      comments=None) -> tuple[list[CalibrationRecord | None], int]:
    """Run ``estimate_h`` per row and write the suite CSV.

    A failing row is recorded with its error message and the suite continues.
    Returns the records (``None`` for failures) and the failure count.
    """
    records, table, failures = [], [], 0
    for cfg in rows:
        try:
            rec = estimate_h(cfg, threads)
        except (NumericalError, ValueError) as exc:
            failures += 1
            records.append(None)
            table.append(_suite_row(cfg, None, str(exc)))
            continue
        records.append(rec)
        table.append(_suite_row(cfg, rec))
    if out is not None:
        write_csv(out, SUITE_HEADER, table, comments)
    return records, failures


# -- manifest -----------------------------------------------------------------

MANIFEST_HEADER = ["table", "family", "nu", "p", "n_design", "a0_d_omega", "design_kind",
                   "n_reps", "reported_h", "note"]

_MOMENTS = (1, 3, 5, 10, 25)

# reported H values, rows = (family, nu, n_design), columns = _MOMENTS
_TABLE2 = {
    ("gaussian", None, 20): (0.11640290, 0.1978563, 0.2450737, 0.4542654, 0.859318),
    ("gaussian", None, 50): (0.08102775, 0.0916648, 0.1206034, 0.1683377, 0.422786),
    ("matern", 1.5, 20): (0.9640650, 1.065597, 0.9537634, 0.9429957, 1.0197966),
    ("matern", 1.5, 50): (0.9442937, 1.009187, 0.8981430, 0.8331926, 0.8372607),
    ("matern", 2.5, 20): (0.7432965, 0.8554707, 0.7804686, 0.8371662, 1.0074204),
    ("matern", 2.5, 50): (0.7304104, 0.8218710, 0.7346077, 0.6987832, 0.7563067),
    ("matern", 3.5, 20): (0.6054239, 0.7248086, 0.6833789, 0.7711124, 0.9608837),
    ("matern", 3.5, 50): (0.3367513, 0.6941391, 0.6244660, 0.6278185, 0.6928741),
}
_TABLE3 = {
    ("gaussian", None, 20): (0.2801128, 0.4767259, 0.5644628, 0.7408401, 1.0554507),
    ("gaussian", None, 50): (0.1465512, 0.2927036, 0.3789438, 0.5683807, 0.9309326),
    ("gaussian", None, 100): (0.1156139, 0.1961319, 0.2436626, 0.4189444, 0.7641615),
    ("matern", 1.5, 20): (0.8106718, 0.9528429, 0.8748865, 0.9365989, 1.0894451),
    ("matern", 1.5, 50): (0.8114071, 0.9299506, 0.8568070, 0.8576984, 0.9964256),
    ("matern", 1.5, 100): (0.8137517, 0.9108342, 0.8224467, 0.7951887, 0.9168643),
    ("matern", 2.5, 20): (0.6072854, 0.7709362, 0.7411921, 0.8540687, 1.0933120),
    ("matern", 2.5, 50): (0.6316136, 0.7218077, 0.7218077, 0.7690956, 0.9703693),
    ("matern", 2.5, 100): (0.5651732, 0.6677120, 0.6677120, 0.7090934, 0.8791792),
    ("matern", 3.5, 20): (0.5243251, 0.6881401, 0.6915576, 0.8290974, 1.0876019),
    ("matern", 3.5, 50): (0.3947094, 0.6420423, 0.6434791, 0.7030224, 0.9494486),
    ("matern", 3.5, 100): (0.2898865, 0.6279639, 0.6036111, 0.6420049, 0.8373886),
}
# (n_design, nu, a0_d_omega, reported, note)
_TABLE4 = [(20, 1.5, 1, 0.6977030, ""), (500, 3.5, 5, 0.4961581, ""),
           (100, 2.5, 3, 0.6628567, ""), (50, 1.5, 10, 0.7632713, "")]
_TABLE5 = [(100, 2.5, 3, 0.6778535, "reported for nu=3 (unsupported); run at neighbour nu=2.5"),
           (100, 3.5, 3, 0.6778535, "reported for nu=3 (unsupported); run at neighbour nu=3.5"),
           (50, 1.5, 1, 0.8144700, ""), (20, 2.5, 5, 0.7735112, ""), (100, 1.5, 10, 0.8164859, "")]


@dataclass(frozen=True)
class ManifestRow:
    table: str
    config: CalibrationConfig
    reported_h: float
    note: str = ""


def paper_manifest() -> list[ManifestRow]:
    """Every configuration of the four published calibration tables."""
    rows = []
    for table, p, data in (("2", 1, _TABLE2), ("3", 2, _TABLE3)):
        for (family, nu, n), values in data.items():
            for a0d, h in zip(_MOMENTS, values):
                rows.append(ManifestRow(table, CalibrationConfig(p, family, nu, a0d, n), h))
    for n, nu, a0d, h, note in _TABLE4:
        rows.append(ManifestRow("4", CalibrationConfig(3, "matern", nu, a0d, n), h, note))
    for n, nu, a0d, h, note in _TABLE5:
        rows.append(ManifestRow("5", CalibrationConfig(2, "matern", nu, a0d, n, UNIFORM), h, note))
    return rows


def write_manifest(rows: list[ManifestRow], path) -> Path:
    out = []
    for r in rows:
        c = r.config
        out.append([r.table, c.family, "" if c.nu is None else c.nu, c.p, c.n_design,
                    float(c.a0_d_omega), c.design_kind, c.n_replications, r.reported_h, r.note])
    return write_csv(path, MANIFEST_HEADER, out)


def read_manifest(path, seed: int | None = None, tables: set | None = None) -> list[ManifestRow]:
    """Parse a manifest CSV.  Optional columns: ``grid_size``, ``seed``,
    ``maximin_candidates``; a global ``seed`` overrides a missing column."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        missing = {"family", "nu", "p", "n_design", "a0_d_omega"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: manifest lacks columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                table = rec.get("table", "") or ""
                if tables and table not in tables:
                    continue
                kw = dict(
                    p=int(rec["p"]), family=rec["family"].strip(),
                    nu=float(rec["nu"]) if rec["nu"].strip() else None,
                    a0_d_omega=float(rec["a0_d_omega"]), n_design=int(rec["n_design"]),
                    design_kind=(rec.get("design_kind") or MAXIMIN_LHS).strip(),
                )
                if rec.get("n_reps"):
                    kw["n_replications"] = int(rec["n_reps"])
                if rec.get("grid_size"):
                    kw["grid_size"] = int(rec["grid_size"])
                if rec.get("maximin_candidates"):
                    kw["maximin_candidates"] = int(rec["maximin_candidates"])
                if rec.get("seed"):
                    kw["seed"] = int(rec["seed"])
                elif seed is not None:
                    kw["seed"] = seed
                reported = float(rec["reported_h"]) if rec.get("reported_h") else math.nan
                rows.append(ManifestRow(table, CalibrationConfig(**kw), reported, rec.get("note") or ""))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return rows


def config_dict(cfg: CalibrationConfig) -> dict:
    return asdict(cfg)
