"""Stationary correlation functions and their spectral moments.

Correlations are parameterised as

* Gaussian: ``exp(-(h/theta)**2)``
* Matern:   ``Gamma(nu)^-1 2^(1-nu) a^nu K_nu(a)`` with ``a = 2 sqrt(nu) |h| / theta``

Only half-integer Matern smoothness is supported; those have closed forms and
need no Bessel routine.  Multivariate kernels are products of 1-d factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

GAUSSIAN = "gaussian"
MATERN = "matern"
FAMILIES = (GAUSSIAN, MATERN)
SUPPORTED_NU = (0.5, 1.5, 2.5, 3.5)


class KernelError(ValueError):
    """Invalid kernel configuration or unavailable kernel quantity."""


def _gamma_half(x: float) -> float:
    """Gamma at a positive integer or half-integer, via factorial identities."""
    k2 = round(2 * x)
    if k2 <= 0 or abs(2 * x - k2) > 1e-12:
        raise KernelError(f"gamma only tabulated at positive half-integers, got {x}")
    if k2 % 2 == 0:
        return float(math.factorial(k2 // 2 - 1))
    # Gamma(k + 1/2) = (2k)! / (4^k k!) sqrt(pi)
    k = (k2 - 1) // 2
    return math.factorial(2 * k) / (4**k * math.factorial(k)) * math.sqrt(math.pi)


def _matern_poly(nu: float, a: np.ndarray) -> np.ndarray:
    if nu == 0.5:
        return np.ones_like(a)
    if nu == 1.5:
        return 1.0 + a
    if nu == 2.5:
        return 1.0 + a + a**2 / 3.0
    return 1.0 + a + 2.0 * a**2 / 5.0 + a**3 / 15.0


@dataclass(frozen=True)
class Kernel1d:
    """One-dimensional stationary correlation function.

    Parameters
    ----------
    family : {"gaussian", "matern"}
    theta : float
        Length scale, > 0.
    nu : float, optional
        Matern smoothness; one of 0.5, 1.5, 2.5, 3.5.  Must be None for
        the Gaussian family.
    """

    family: str
    theta: float
    nu: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise KernelError(f"theta must be positive, got {self.theta}")
        if self.family == MATERN:
            if self.nu is None or float(self.nu) not in SUPPORTED_NU:
                raise KernelError(f"matern nu must be one of {SUPPORTED_NU}, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))
        elif self.nu is not None:
            raise KernelError("gaussian kernel takes no nu")
        object.__setattr__(self, "theta", float(self.theta))

    def __call__(self, h):
        return correlation_1d(self, h)

    @property
    def frequency_scale(self) -> float:
        # both spectral densities are scale families in omega * theta / sqrt(2)
        return math.sqrt(2.0) / self.theta

    def spectral_density(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.family == GAUSSIAN:
            return self.theta / (2 * math.sqrt(math.pi)) * np.exp(-(omega**2) * self.theta**2 / 4)
        nu = self.nu
        c = 4 * nu / self.theta**2
        const = _gamma_half(nu + 0.5) / (_gamma_half(nu) * math.sqrt(math.pi)) * c**nu
        return const * (omega**2 + c) ** (-(nu + 0.5))

    def sample_frequencies(self, size, rng: np.random.Generator) -> np.ndarray:
        """Draw frequencies from the spectral density.

        Gaussian: normal with sd ``sqrt(2)/theta``.  Matern: Student-t with
        ``2 nu`` degrees of freedom and the same scale.
        """
        if self.family == GAUSSIAN:
            return rng.standard_normal(size) * self.frequency_scale
        return rng.standard_t(2 * self.nu, size) * self.frequency_scale


def correlation_1d(k: Kernel1d, h):
    """Evaluate the 1-d correlation at lag(s) ``h``."""
    h = np.abs(np.asarray(h, dtype=float))
    if k.family == GAUSSIAN:
        out = np.exp(-((h / k.theta) ** 2))
    else:
        a = 2.0 * math.sqrt(k.nu) * h / k.theta
        out = _matern_poly(k.nu, a) * np.exp(-a)
    return out if out.ndim else float(out)


def a0_moment_1d(k: Kernel1d) -> float:
    """First absolute moment of the spectral density, E|omega|."""
    if k.family == GAUSSIAN:
        return 2.0 / (math.sqrt(math.pi) * k.theta)
    nu = k.nu
    if nu <= 0.5:
        raise KernelError(f"A0 diverges for matern nu={nu} (needs nu > 1/2)")
    return (
        4 * math.sqrt(nu) * _gamma_half(nu + 0.5)
        / (math.sqrt(math.pi) * (2 * nu - 1) * k.theta * _gamma_half(nu))
    )


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in R^p."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if any(not a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, p: int) -> "Domain":
        return cls((0.0,) * p, (1.0,) * p)

    @property
    def p(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= np.array(self.lower) - tol) & (x <= np.array(self.upper) + tol), axis=1)

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class ProductKernel:
    """Product correlation across dimensions, scaled by a variance."""

    components: tuple
    variance: float = 1.0

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise KernelError("a product kernel needs at least one component")
        if not all(isinstance(c, Kernel1d) for c in comps):
            raise KernelError("components must be Kernel1d instances")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise KernelError(f"variance must be positive, got {self.variance}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", float(self.variance))

    @classmethod
    def isotropic(cls, family: str, theta: float, p: int, nu: float | None = None,
                  variance: float = 1.0) -> "ProductKernel":
        return cls(tuple(Kernel1d(family, theta, nu) for _ in range(p)), variance)

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def correlation_matrix(self, X1, X2) -> np.ndarray:
        """Pairwise correlations between the rows of ``X1`` and ``X2``."""
        X1 = np.atleast_2d(np.asarray(X1, dtype=float))
        X2 = np.atleast_2d(np.asarray(X2, dtype=float))
        if X1.shape[1] != self.p or X2.shape[1] != self.p:
            raise ValueError(f"points must have {self.p} columns")
        out = np.ones((X1.shape[0], X2.shape[0]))
        for i, comp in enumerate(self.components):
            out *= correlation_1d(comp, X1[:, i, None] - X2[None, :, i])
        return out

    def covariance_matrix(self, X1, X2) -> np.ndarray:
        return self.variance * self.correlation_matrix(X1, X2)

    def sample_frequencies(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` frequency vectors from the product spectral density, shape (n, p)."""
        return np.column_stack([c.sample_frequencies(n, rng) for c in self.components])


def correlation(k: ProductKernel, h: Sequence[float]) -> float:
    h = np.asarray(h, dtype=float)
    if h.shape != (k.p,):
        raise ValueError(f"lag has shape {h.shape}, kernel expects ({k.p},)")
    return float(np.prod([correlation_1d(c, hi) for c, hi in zip(k.components, h)]))


def a0_moment(k: ProductKernel) -> float:
    """A0 of a product kernel: the sum of the marginal moments."""
    return float(sum(a0_moment_1d(c) for c in k.components))


def theta_for_target(family: str, nu: float | None, target_a0_d: float, domain: Domain) -> float:
    """Common length scale giving ``a0_moment * diameter == target_a0_d``.

    A0 scales as ``1/theta``, so the inversion is closed form.
    """
    if not target_a0_d > 0:
        raise KernelError(f"target A0*D must be positive, got {target_a0_d}")
    unit = a0_moment_1d(Kernel1d(family, 1.0, nu))
    return unit * domain.p * domain.diameter() / target_a0_d


def kernel_for_target(family: str, nu: float | None, target_a0_d: float, domain: Domain,
                      variance: float = 1.0) -> ProductKernel:
    theta = theta_for_target(family, nu, target_a0_d, domain)
    return ProductKernel.isotropic(family, theta, domain.p, nu, variance)
