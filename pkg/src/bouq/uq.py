"""Uniform confidence upper limits and the regions/intervals built from them.

``upper_cl(x) = mu(x) + s(x) sqrt(log(e sigma / s(x))) (C sqrt(p max(1, log(A0 D))) + t)``

With data from any sequential sampling policy and stopping rule the same
formulae apply to the final posterior, so there is no separate sequential API.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import norm

from . import search
from .gp import GpPosterior
from .kernels import Domain, ProductKernel, a0_moment

NAIVE_QUANTILE = float(norm.ppf(0.95))  # 1.6448536...


def t_for_level(alpha: float) -> float:
    """``t`` with ``exp(-t^2/2) = alpha``; the region then has level ``1 - alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(-2.0 * math.log(alpha))


@dataclass(frozen=True)
class UqConstants:
    """Global constants of the confidence limit.

    Attributes
    ----------
    c0 : float
        Universal constant (1.0 is the robust default).
    t : float
        Significance parameter; level is ``1 - exp(-t^2/2)``.
    a0, d_omega : float
        Spectral moment of the kernel and the domain diameter.
    p : int
    sigma : float
        Prior standard deviation.
    """

    t: float
    a0: float
    d_omega: float
    p: int
    sigma: float
    c0: float = 1.0

    def __post_init__(self):
        for name in ("t", "a0", "d_omega", "sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.c0 < 0 or self.p < 1:
            raise ValueError("need c0 >= 0 and p >= 1")

    @classmethod
    def from_kernel(cls, kernel: ProductKernel, domain: Domain, t: float | None = None,
                    alpha: float = 0.05, c0: float = 1.0) -> "UqConstants":
        if t is None:
            t = t_for_level(alpha)
        return cls(t=t, a0=a0_moment(kernel), d_omega=domain.diameter(), p=kernel.p,
                   sigma=kernel.sigma, c0=c0)

    def bound_factor(self) -> float:
        return self.c0 * math.sqrt(self.p * max(1.0, math.log(self.a0 * self.d_omega)))

    def level(self) -> float:
        return 1.0 - math.exp(-self.t**2 / 2)

    def multiplier(self) -> float:
        return self.bound_factor() + self.t


def log_inflation(s, sigma: float) -> np.ndarray:
    """``s sqrt(log(e sigma / s))`` with the value 0 at ``s = 0``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, sigma)
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, s * np.sqrt(np.log(math.e * sigma / safe)), 0.0)


def upper_cl_parts(X, consts: UqConstants, post: GpPosterior):
    """Return (mu, s, upper_cl) at the rows of ``X``."""
    mu, var = post.predict(X)
    s = np.sqrt(var)
    return mu, s, mu + log_inflation(s, consts.sigma) * consts.multiplier()


def upper_cl(x, consts: UqConstants, post: GpPosterior):
    """Uniform confidence upper limit at a point (scalar) or at rows of a matrix."""
    x = np.asarray(x, dtype=float)
    val = upper_cl_parts(np.atleast_2d(x), consts, post)[2]
    return float(val[0]) if x.ndim == 1 else val


def _best_observed(post: GpPosterior) -> tuple[float, np.ndarray]:
    if post.n < 1:
        raise ValueError("confidence sets need at least one observation")
    i = int(np.argmax(post.data.responses))
    return float(post.data.responses[i]), post.data.points[i].copy()


def _points(candidates) -> np.ndarray:
    pts = getattr(candidates, "points", candidates)
    return np.atleast_2d(np.asarray(pts, dtype=float))


def confidence_region(candidates, consts: UqConstants, post: GpPosterior,
                      observed_max: float | None = None) -> np.ndarray:
    """Boolean mask: candidates whose upper limit reaches the best observed value."""
    if observed_max is None:
        observed_max = _best_observed(post)[0]
    elif post.n < 1:
        raise ValueError("confidence sets need at least one observation")
    return upper_cl(_points(candidates), consts, post) >= observed_max


def confidence_interval(consts: UqConstants, post: GpPosterior, candidates,
                        domain: Domain | None = None, polish: bool = True) -> tuple[float, float]:
    """``[max observed, max upper_cl]``; the max is a candidate sweep plus local polish."""
    lo, _ = _best_observed(post)
    _, hi = search.maximize(lambda X: upper_cl(X, consts, post), _points(candidates),
                            domain, polish=polish)
    return lo, max(lo, hi)


def naive_interval(post: GpPosterior, candidates, domain: Domain | None = None,
                   polish: bool = True, q: float = NAIVE_QUANTILE) -> tuple[float, float]:
    """Pointwise baseline ``[max observed, max mu + q s]``."""
    lo, _ = _best_observed(post)

    def f(X):
        mu, var = post.predict(X)
        return mu + q * np.sqrt(var)

    _, hi = search.maximize(f, _points(candidates), domain, polish=polish)
    return lo, max(lo, hi)


@dataclass(frozen=True)
class UqOutput:
    region_mask: np.ndarray
    interval: tuple
    naive_interval: tuple
    best_observed: float
    argbest: np.ndarray


def quantify(post: GpPosterior, consts: UqConstants, candidates, domain: Domain | None = None,
             polish: bool = True) -> UqOutput:
    """Region mask, interval and naive interval in one call."""
    best, argbest = _best_observed(post)
    pts = _points(candidates)
    return UqOutput(
        region_mask=confidence_region(pts, consts, post, best),
        interval=confidence_interval(consts, post, pts, domain, polish),
        naive_interval=naive_interval(post, pts, domain, polish),
        best_observed=best,
        argbest=argbest,
    )


class KnnRegion:
    """Majority-vote k-NN membership predictor for a region sampled on candidates.

    A tie (possible for even ``k``) counts as inside, which errs towards the
    larger, more conservative region.
    """

    def __init__(self, points, labels, k: int):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.labels = np.asarray(labels, dtype=bool).reshape(-1)
        if self.points.shape[0] == 0:
            raise ValueError("need at least one labelled point")
        if self.labels.size != self.points.shape[0]:
            raise ValueError("one label per point required")
        if not 1 <= k <= self.points.shape[0]:
            raise ValueError(f"k must lie in [1, {self.points.shape[0]}], got {k}")
        self.k = int(k)
        self._tree = cKDTree(self.points)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _, idx = self._tree.query(X, k=self.k)
        idx = np.asarray(idx).reshape(X.shape[0], self.k)
        votes = self.labels[idx].sum(axis=1)
        return 2 * votes >= self.k

    def to_dict(self) -> dict:
        return {"k": self.k, "points": self.points.tolist(), "labels": self.labels.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KnnRegion":
        return cls(d["points"], d["labels"], d["k"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "KnnRegion":
        return cls.from_dict(json.loads(s))


def region_knn_summary(candidates, mask, k: int) -> KnnRegion:
    return KnnRegion(_points(candidates), mask, k)
