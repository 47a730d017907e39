"""Abstract Bayesian optimisation: information, policies, stopping rules.

A policy is any callable ``policy(info, kernel, domain, seed) -> (b, p) array``
and a stopping rule any callable ``stop(info) -> bool``.  ``run_abo`` merges the
evaluated batches until the rule fires (never before the first batch).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import norm

from . import search
from .gp import Dataset, GpPosterior, derive_seed, fit, posterior_sample
from .kernels import Domain, ProductKernel

HARD_CAP = 1000


class PolicyError(RuntimeError):
    pass


class ObjectiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Information:
    """Ordered batches ``(X_i, Y_i)`` collected so far."""

    p: int
    batches: tuple = ()
    truncated: bool = False

    def __post_init__(self):
        for X, Y in self.batches:
            if X.ndim != 2 or X.shape[1] != self.p or X.shape[0] != Y.shape[0]:
                raise ValueError("batch shapes inconsistent")

    @property
    def T(self) -> int:
        """Number of completed iterations."""
        return len(self.batches)

    @property
    def X(self) -> np.ndarray:
        if not self.batches:
            return np.empty((0, self.p))
        return np.vstack([X for X, _ in self.batches])

    @property
    def Y(self) -> np.ndarray:
        if not self.batches:
            return np.empty(0)
        return np.concatenate([Y for _, Y in self.batches])

    @property
    def m(self) -> int:
        return sum(X.shape[0] for X, _ in self.batches)

    def best(self) -> float:
        return float(self.Y.max()) if self.batches else -math.inf

    def best_history(self) -> np.ndarray:
        """Best observed value after each iteration."""
        return np.maximum.accumulate([Y.max() for _, Y in self.batches]) if self.batches else np.empty(0)

    def append(self, X, Y) -> "Information":
        X = np.atleast_2d(np.array(X, dtype=float))
        Y = np.array(Y, dtype=float).reshape(-1)
        X.setflags(write=False)
        Y.setflags(write=False)
        return replace(self, batches=self.batches + ((X, Y),))

    def prefix(self, k: int) -> "Information":
        return replace(self, batches=self.batches[:k], truncated=False)

    def dataset(self) -> Dataset:
        return Dataset(self.X, self.Y)


Policy = Callable[[Information, ProductKernel, Domain, object], np.ndarray]
StoppingRule = Callable[[Information], bool]


def run_abo(policy: Policy, stop: StoppingRule, objective: Callable[[np.ndarray], float],
            kernel: ProductKernel, domain: Domain, seed=None, hard_cap: int = HARD_CAP) -> Information:
    """Sample, evaluate and merge until ``stop`` returns True.

    The stopping rule is first consulted after iteration 1, so ``T >= 1``.
    Reaching ``hard_cap`` iterations ends the run with ``truncated=True``.
    """
    if hard_cap < 1:
        raise ValueError("hard_cap must be >= 1")
    info = Information(domain.p)
    while True:
        if info.T >= 1 and stop(info):
            return info
        if info.T >= hard_cap:
            return replace(info, truncated=True)
        X = np.atleast_2d(np.asarray(policy(info, kernel, domain, derive_seed(seed, info.T)),
                                     dtype=float))
        if X.shape[0] < 1 or X.shape[1] != domain.p:
            raise PolicyError(f"policy returned a batch of shape {X.shape}")
        if not np.all(domain.contains(X)):
            raise PolicyError("policy returned a point outside the domain")
        Y = np.array([float(objective(x)) for x in X])
        if not np.all(np.isfinite(Y)):
            raise ObjectiveError(f"objective returned non-finite value(s) at iteration {info.T + 1}")
        info = info.append(X, Y)


# -- acquisition functions ---------------------------------------------------

def expected_improvement(mu, s, y_star: float) -> np.ndarray:
    """``E (Z - y*)^+`` for ``Z ~ N(mu, s^2)``, elementwise."""
    mu, s = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(s, dtype=float))
    diff = mu - y_star
    pos = s > 0
    z = diff / np.where(pos, s, 1.0)
    out = np.where(pos, diff * norm.cdf(z) + s * norm.pdf(z), diff)
    return np.maximum(out, 0.0)


def acq_ei(X, post: GpPosterior) -> np.ndarray:
    """Expected improvement over the best observed value."""
    if post.n < 1:
        raise ValueError("expected improvement needs at least one observation")
    mu, var = post.predict(X)
    return expected_improvement(mu, np.sqrt(var), float(post.data.responses.max()))


def acq_ucb(X, post: GpPosterior, beta_n: float) -> np.ndarray:
    if beta_n < 0:
        raise ValueError("beta_n must be non-negative")
    mu, var = post.predict(X)
    return mu + beta_n * np.sqrt(var)


def acq_pes_draw(post: GpPosterior, n_features: int, seed):
    """A posterior function draw; its maximiser is the next point."""
    return posterior_sample(post, n_features, seed)


def ucb_beta(n: int, n_candidates: int, delta: float = 0.1) -> float:
    """``sqrt(2 log(|D| n^2 pi^2 / (6 delta)))`` for a finite candidate set."""
    n = max(int(n), 1)
    return math.sqrt(2.0 * math.log(n_candidates * n**2 * math.pi**2 / (6.0 * delta)))


def maximize_acquisition(acq, domain: Domain, candidates, polish_budget: int = search.POLISH_BUDGET):
    x, _ = search.maximize(acq, candidates, domain, budget=polish_budget,
                           polish=polish_budget > 0)
    return x


# -- policies -----------------------------------------------------------------

class AcquisitionPolicy:
    """Initial design first, then one acquisition maximiser per iteration.

    Parameters
    ----------
    initial : (n0, p) array
        Batch returned while the information is empty.
    candidates : (m, p) array
        Sweep set for the acquisition maximiser.
    polish_budget : int
        Coordinate-search evaluations per start; 0 keeps the choice on the
        candidate set.
    exclude_observed : bool
        Drop candidates that were already evaluated.
    """

    name = "acquisition"

    def __init__(self, initial, candidates, polish_budget: int = search.POLISH_BUDGET,
                 exclude_observed: bool = True):
        self.initial = np.atleast_2d(np.asarray(initial, dtype=float))
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self.polish_budget = polish_budget
        self.exclude_observed = exclude_observed

    def acquisition(self, post: GpPosterior, info: Information, rng: np.random.Generator):
        raise NotImplementedError

    def _fresh_candidates(self, X: np.ndarray, tol: float) -> np.ndarray:
        if not self.exclude_observed or X.shape[0] == 0:
            return self.candidates
        d2 = ((self.candidates[:, None, :] - X[None, :, :]) ** 2).sum(-1).min(axis=1)
        keep = d2 > tol**2
        if not np.any(keep):
            raise PolicyError("every candidate has already been evaluated")
        return self.candidates[keep]

    def __call__(self, info: Information, kernel: ProductKernel, domain: Domain, seed) -> np.ndarray:
        if info.T == 0:
            return self.initial
        rng = np.random.default_rng(seed)
        post = fit(kernel, info.dataset())
        acq = self.acquisition(post, info, rng)
        tol = 1e-9 * domain.diameter()
        cands = self._fresh_candidates(info.X, tol)
        x = maximize_acquisition(acq, domain, cands, self.polish_budget)
        if np.min(((info.X - x) ** 2).sum(-1)) <= tol**2:
            # polishing walked onto a design point; keep the best fresh candidate
            x = cands[int(np.argmax(acq(cands)))]
        return x[None, :]


class UcbPolicy(AcquisitionPolicy):
    """Upper confidence bound; ``beta`` is a constant or ``None`` for the ``ucb_beta`` schedule."""

    name = "ucb"

    def __init__(self, initial, candidates, beta: float | None = None, delta: float = 0.1, **kw):
        super().__init__(initial, candidates, **kw)
        self.beta = beta
        self.delta = delta

    def beta_at(self, info: Information) -> float:
        if self.beta is not None:
            return float(self.beta)
        return ucb_beta(info.T, len(self.candidates), self.delta)

    def acquisition(self, post, info, rng):
        beta = self.beta_at(info)
        return lambda X: acq_ucb(X, post, beta)


class EiPolicy(AcquisitionPolicy):
    name = "ei"

    def acquisition(self, post, info, rng):
        return lambda X: acq_ei(X, post)


class PesPolicy(AcquisitionPolicy):
    name = "pes"

    def __init__(self, initial, candidates, n_features: int = 1024, **kw):
        super().__init__(initial, candidates, **kw)
        self.n_features = n_features

    def acquisition(self, post, info, rng):
        return acq_pes_draw(post, self.n_features, rng)


POLICIES = {cls.name: cls for cls in (UcbPolicy, EiPolicy, PesPolicy)}


# -- stopping rules -----------------------------------------------------------

class StopAfter:
    """Fixed budget of iterations."""

    def __init__(self, iterations: int):
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        self.iterations = iterations

    def __call__(self, info: Information) -> bool:
        return info.T >= self.iterations


class StopNoImprovement:
    """Stop once the best value gained at most ``epsilon`` over the last ``window`` iterations."""

    def __init__(self, window: int, epsilon: float):
        if window < 1 or epsilon < 0:
            raise ValueError("need window >= 1 and epsilon >= 0")
        self.window = window
        self.epsilon = epsilon

    def __call__(self, info: Information) -> bool:
        hist = info.best_history()
        if hist.size <= self.window:
            return False
        return bool(hist[-1] - hist[-1 - self.window] <= self.epsilon)


def stop_after(iterations: int) -> StopAfter:
    return StopAfter(iterations)


def stop_no_improvement(window: int, epsilon: float) -> StopNoImprovement:
    return StopNoImprovement(window, epsilon)


@dataclass
class StopAny:
    rules: list = field(default_factory=list)

    def __call__(self, info: Information) -> bool:
        return any(rule(info) for rule in self.rules)


def trace_rows(info: Information, policy_name: str):
    """Rows ``(iteration, x1..xp, response, best_so_far, policy_name)``, one per point."""
    best = -math.inf
    for it, (X, Y) in enumerate(info.batches, start=1):
        for x, y in zip(X, Y):
            best = max(best, float(y))
            yield [it, *map(float, x), float(y), best, policy_name]


def trace_header(p: int) -> list:
    return ["iteration", *[f"x{i + 1}" for i in range(p)], "response", "best_so_far", "policy_name"]
