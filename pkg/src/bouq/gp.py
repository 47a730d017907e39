"""Noiseless Gaussian process regression and process simulation.

The posterior is the usual kriging predictor for a zero-mean process with
covariance ``variance * Psi(x - x')``::

    mu(x)    = r(x)^T K^{-1} Y
    var(x)   = variance * (1 - r(x)^T K^{-1} r(x))

``K`` is factorised once with a small diagonal jitter; the jitter is also added
to ``r(x)`` wherever ``x`` coincides with a design point, so predictions at the
data reproduce ``Y`` exactly whatever the conditioning of ``K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .kernels import Domain, ProductKernel

JITTER_START = 1e-10
JITTER_MAX = 1e-6
DUPLICATE_TOL = 1e-12


class NumericalError(RuntimeError):
    """A factorisation failed even after jitter escalation."""


class DuplicatePointError(ValueError):
    pass


def derive_seed(seed, *keys: int) -> np.random.SeedSequence | None:
    """Child seed for a sub-stream; ``seed`` may be an int, a SeedSequence or None."""
    if seed is None:
        return None
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key + keys)
    return np.random.SeedSequence(entropy=seed, spawn_key=keys)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _min_pairwise_distance(X: np.ndarray) -> tuple[float, tuple[int, int]]:
    n = X.shape[0]
    if n < 2:
        return math.inf, (-1, -1)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    d2[np.diag_indices(n)] = np.inf
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    return math.sqrt(d2[i, j]), (int(i), int(j))


@dataclass(frozen=True)
class Dataset:
    """Design points (n, p) and their responses (n,)."""

    points: np.ndarray
    responses: np.ndarray
    duplicate_tol: float = DUPLICATE_TOL

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.responses, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} points but {y.shape[0]} responses")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("points and responses must be finite")
        dmin, (i, j) = _min_pairwise_distance(X)
        if dmin <= self.duplicate_tol:
            raise DuplicatePointError(f"design points {i} and {j} coincide (distance {dmin:.3g})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "responses", y)

    @classmethod
    def empty(cls, p: int) -> "Dataset":
        return cls(np.empty((0, p)), np.empty(0))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def check_domain(self, domain: Domain) -> None:
        inside = domain.contains(self.points)
        if not np.all(inside):
            raise ValueError(f"design point {int(np.argmin(inside))} lies outside the domain")


def cholesky_with_jitter(K: np.ndarray, start: float = JITTER_START,
                         maximum: float = JITTER_MAX) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*I`` with jitter escalated x10 on failure."""
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    jitter = start
    eye = np.eye(K.shape[0])
    while jitter <= maximum * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * scale * eye), jitter * scale
        except np.linalg.LinAlgError:
            jitter *= 10
    raise NumericalError(
        "correlation matrix numerically singular "
        f"(jitter up to {maximum:g} failed; near-duplicate points or extreme theta?)"
    )


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """Fitted posterior state.  ``data.n == 0`` represents the prior."""

    kernel: ProductKernel
    data: Dataset
    chol: np.ndarray | None = None
    kinv_y: np.ndarray | None = None
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def sigma(self) -> float:
        return self.kernel.sigma

    def _zero_lag(self, X: np.ndarray) -> np.ndarray:
        d2 = ((X[:, None, :] - self.data.points[None, :, :]) ** 2).sum(-1)
        return d2 <= self.data.duplicate_tol**2

    def _cross(self, X: np.ndarray) -> np.ndarray:
        R = self.kernel.correlation_matrix(X, self.data.points)
        if self.jitter:
            # zero-lag entries carry the nugget used in the factorisation
            R[self._zero_lag(X)] += self.jitter
        return R

    def predict(self, X, return_raw_var: bool = False):
        """Posterior mean and variance at the rows of ``X``.

        Variances are clamped to ``[0, variance]``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.kernel.p:
            raise ValueError(f"query points must have {self.kernel.p} columns, got {X.shape[1]}")
        s2 = self.kernel.variance
        if self.n == 0:
            mu = np.zeros(X.shape[0])
            raw = np.full(X.shape[0], s2)
        else:
            R = self._cross(X)
            mu = R @ self.kinv_y
            V = solve_triangular(self.chol, R.T, lower=True, check_finite=False)
            raw = s2 * (1.0 - np.einsum("ij,ij->j", V, V))
        var = np.clip(raw, 0.0, s2)
        if self.n:
            # at design points return the data exactly, free of roundoff
            row, col = np.nonzero(self._zero_lag(X))
            mu[row] = self.data.responses[col]
            var[row] = 0.0
        if return_raw_var:
            return mu, var, raw
        return mu, var

    def mean_sd(self, X):
        mu, var = self.predict(X)
        return mu, np.sqrt(var)


def prior(kernel: ProductKernel) -> GpPosterior:
    return GpPosterior(kernel, Dataset.empty(kernel.p))


def fit(kernel: ProductKernel, data: Dataset, domain: Domain | None = None) -> GpPosterior:
    """Factorise the design correlation matrix and precompute ``K^{-1} Y``."""
    if data.n < 1:
        raise ValueError("fit needs at least one design point; use prior() for n = 0")
    if data.p != kernel.p:
        raise ValueError(f"data has {data.p} columns, kernel expects {kernel.p}")
    if domain is not None:
        data.check_domain(domain)
    K = kernel.correlation_matrix(data.points, data.points)
    L, jitter = cholesky_with_jitter(K)
    kinv_y = solve_triangular(L.T, solve_triangular(L, data.responses, lower=True), lower=False)
    L.setflags(write=False)
    kinv_y.setflags(write=False)
    return GpPosterior(kernel, data, L, kinv_y, jitter)


def posterior_mean_var(post: GpPosterior | ProductKernel, x) -> tuple[float, float]:
    """Mean and variance at a single point; a bare kernel means the prior."""
    if isinstance(post, ProductKernel):
        post = prior(post)
    mu, var = post.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mu[0]), float(var[0])


def _pivoted_factor(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank-revealing factor: returns (L, perm) with S[perm][:, perm] ~= L @ L.T."""
    c, piv, rank, info = lapack.dpstrf(S, lower=1)
    if info < 0:
        raise NumericalError(f"pivoted Cholesky failed (LAPACK info={info})")
    return np.tril(c)[:, :rank], piv - 1


def simulate_on_grid(kernel: ProductKernel, grid, seed, method: str = "pivoted",
                     size: int | None = None) -> np.ndarray:
    """Exact draw(s) of the process at the rows of ``grid``.

    ``method="pivoted"`` uses a rank-revealing pivoted Cholesky of the
    covariance, which needs no jitter and so adds no white noise to very
    smooth processes.  ``method="cholesky"`` uses the jitter ladder.
    With ``size`` set, returns an array of shape (size, m).
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] < 1:
        raise ValueError("grid must contain at least one point")
    rng = as_rng(seed)
    S = kernel.correlation_matrix(grid, grid)
    m = grid.shape[0]
    n_draws = 1 if size is None else size
    if method == "pivoted":
        L, perm = _pivoted_factor(S)
        xi = rng.standard_normal((L.shape[1], n_draws))
        out = np.empty((m, n_draws))
        out[perm] = L @ xi
    elif method == "cholesky":
        L, _ = cholesky_with_jitter(S)
        out = L @ rng.standard_normal((m, n_draws))
    else:
        raise ValueError(f"unknown simulation method {method!r}")
    out *= kernel.sigma
    return out[:, 0] if size is None else out.T


@dataclass(frozen=True, eq=False)
class FeatureSample:
    """A random-feature function ``sigma sqrt(2/J) sum_j cos(w_j . x + b_j)``."""

    omega: np.ndarray
    phase: np.ndarray
    amplitude: float

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        vals = self.amplitude * np.cos(X @ self.omega.T + self.phase).sum(axis=1)
        return float(vals[0]) if single else vals


def spectral_sample(kernel: ProductKernel, n_features: int, seed) -> FeatureSample:
    """Approximate prior draw via random Fourier features."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    rng = as_rng(seed)
    omega = kernel.sample_frequencies(n_features, rng)
    phase = rng.uniform(0.0, 2 * math.pi, n_features)
    return FeatureSample(omega, phase, kernel.sigma * math.sqrt(2.0 / n_features))


@dataclass(frozen=True, eq=False)
class PosteriorSample:
    """Prior feature draw plus the kriging interpolant of its residuals at the data."""

    prior_draw: FeatureSample
    post: GpPosterior
    weights: np.ndarray = field(repr=False)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        vals = self.prior_draw(X)
        if self.post.n:
            vals = vals + self.post._cross(X) @ self.weights
        return float(vals[0]) if single else vals


def posterior_sample(post: GpPosterior, n_features: int, seed) -> PosteriorSample:
    draw = spectral_sample(post.kernel, n_features, seed)
    if post.n == 0:
        return PosteriorSample(draw, post, np.empty(0))
    resid = post.data.responses - draw(post.data.points)
    L = post.chol
    w = solve_triangular(L.T, solve_triangular(L, resid, lower=True), lower=False)
    return PosteriorSample(draw, post, w)


def normalized_error(post: GpPosterior, truth, grid) -> np.ndarray:
    """``(Z - mu) / (s sqrt(log(e sigma / s)))`` per grid point, with 0/0 = 0."""
    truth = np.asarray(truth, dtype=float).reshape(-1)
    mu, var = post.predict(grid)
    if truth.shape != mu.shape:
        raise ValueError("truth must have one value per grid row")
    s = np.sqrt(var)
    denom = s * np.sqrt(np.log(math.e * post.sigma / np.where(s > 0, s, 1.0)))
    out = np.zeros_like(mu)
    pos = s > 0
    out[pos] = (truth[pos] - mu[pos]) / denom[pos]
    return out


def sup_statistic_m(post: GpPosterior, truth, grid) -> float:
    """Grid surrogate of the supremum of the normalised prediction error."""
    return float(np.max(normalized_error(post, truth, grid)))

