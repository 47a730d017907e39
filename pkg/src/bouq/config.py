"""Experiment configuration read from INI-style files.

Example::

    [experiment]
    mode = coverage
    seed = 0
    n_repetitions = 100
    checkpoints = 5, 10, 15, 20, 25, 30

    [kernel]
    family = matern
    nu = 1.5, 2.5, 3.5
    a0_d_omega = 25

    [domain]
    lower = 0, 0
    upper = 1, 1

Every key is optional; defaults reproduce the published coverage study.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .kernels import Domain, Kernel1d, KernelError, ProductKernel, kernel_for_target

MODES = ("calibrate", "coverage", "optimize", "upper-cl")


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _ints(s: str) -> tuple:
    return tuple(int(v) for v in s.replace(";", ",").split(",") if v.strip())


def _opt_float(s: str):
    s = s.strip().lower()
    return None if s in ("", "none", "auto") else float(s)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "coverage"
    seed: int = 0
    output: str = ""
    # kernel
    family: str = "matern"
    nu: tuple = (1.5, 2.5, 3.5)
    a0_d_omega: float | None = 25.0
    theta: tuple = ()
    variance: float = 1.0
    # domain
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)
    # coverage study
    n_initial: int = 5
    checkpoints: tuple = (5, 10, 15, 20, 25, 30)
    n_repetitions: int = 100
    # confidence limits
    alpha: float = 0.05
    c0: float = 1.0
    # candidate sets and search
    grid_per_dim: int = 51
    random_candidates: int = 4096
    polish_budget: int = 100
    lhs_candidates: int = 1000
    knn_k: int = 5
    # optimisation runs
    policy: str = "ucb"
    beta: float | None = None
    beta_delta: float = 0.1
    iterations: int = 10
    stop: str = "budget"
    window: int = 3
    epsilon: float = 1e-6
    hard_cap: int = 1000
    n_features: int = 1024

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.lower) != len(self.upper):
            raise ConfigError("domain lower/upper lengths differ")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.a0_d_omega is None and not self.theta:
            raise ConfigError("kernel needs either a0_d_omega or theta")
        if self.stop not in ("budget", "no-improvement"):
            raise ConfigError("stop must be 'budget' or 'no-improvement'")
        if any(c < 1 for c in self.checkpoints) or not self.checkpoints:
            raise ConfigError("checkpoints must be positive iteration counts")
        if self.n_repetitions < 1 or self.n_initial < 2:
            raise ConfigError("need n_repetitions >= 1 and n_initial >= 2")
        try:
            self.domain
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for nu in self.nu_values():
            self.kernel(nu)

    @property
    def domain(self) -> Domain:
        return Domain(self.lower, self.upper)

    @property
    def p(self) -> int:
        return len(self.lower)

    def nu_values(self) -> tuple:
        return (None,) if self.family == "gaussian" else tuple(self.nu)

    def kernel(self, nu=None) -> ProductKernel:
        """Kernel for one smoothness value (the first configured one by default)."""
        if nu is None and self.family != "gaussian":
            nu = self.nu[0]
        try:
            if self.theta:
                thetas = self.theta if len(self.theta) > 1 else self.theta * self.p
                if len(thetas) != self.p:
                    raise ConfigError(f"theta needs 1 or {self.p} values")
                return ProductKernel(tuple(Kernel1d(self.family, th, nu) for th in thetas),
                                     self.variance)
            return kernel_for_target(self.family, nu, self.a0_d_omega, self.domain, self.variance)
        except KernelError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = ", ".join(str(x) for x in v) if isinstance(v, tuple) else v
        return out


_PARSERS = {
    "mode": str, "seed": int, "output": str, "family": lambda s: s.strip().lower(),
    "nu": _floats, "a0_d_omega": _opt_float, "theta": _floats, "variance": float,
    "lower": _floats, "upper": _floats, "n_initial": int, "checkpoints": _ints,
    "n_repetitions": int, "alpha": float, "c0": float, "grid_per_dim": int,
    "random_candidates": int, "polish_budget": int, "lhs_candidates": int, "knn_k": int,
    "policy": lambda s: s.strip().lower(), "beta": _opt_float, "beta_delta": float,
    "iterations": int, "stop": lambda s: s.strip().lower(), "window": int,
    "epsilon": float, "hard_cap": int, "n_features": int,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}

SECTIONS = ("experiment", "kernel", "domain", "uq", "search", "abo")


def parse_config(text: str, source: str = "<string>", **overrides) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]; expected {SECTIONS}")
        for key, raw in cp.items(section):
            if key not in _PARSERS:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _PARSERS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r}: {exc}") from exc
    # an explicit theta switches off the A0*D target unless both are given
    if "theta" in values and "a0_d_omega" not in values:
        values["a0_d_omega"] = None
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path), **overrides)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
