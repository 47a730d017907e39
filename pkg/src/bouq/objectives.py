"""Built-in objectives for the ``optimize`` command (all maximised).

Classical test functions are defined on the configured box by rescaling it
onto their usual domain, and negated so that their minimum becomes the max.
"""
from __future__ import annotations

import math

import numpy as np

from .gp import spectral_sample
from .kernels import Domain, ProductKernel


def _unit(x, domain: Domain) -> np.ndarray:
    return (np.asarray(x, dtype=float) - np.asarray(domain.lower)) / domain.width


def branin(domain: Domain):
    """Negated Branin on ``[-5, 10] x [0, 15]``; maximum -0.397887."""
    if domain.p != 2:
        raise ValueError("branin is two-dimensional")

    def f(x):
        u = _unit(x, domain)
        x1, x2 = -5 + 15 * u[0], 15 * u[1]
        b, c, t = 5.1 / (4 * math.pi**2), 5 / math.pi, 1 / (8 * math.pi)
        return -((x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * math.cos(x1) + 10)

    return f


def six_hump_camel(domain: Domain):
    """Negated six-hump camel on ``[-3, 3] x [-2, 2]``; maximum 1.0316."""
    if domain.p != 2:
        raise ValueError("six-hump-camel is two-dimensional")

    def f(x):
        u = _unit(x, domain)
        a, b = -3 + 6 * u[0], -2 + 4 * u[1]
        return -((4 - 2.1 * a**2 + a**4 / 3) * a**2 + a * b + (-4 + 4 * b**2) * b**2)

    return f


def gp_sample(kernel: ProductKernel, seed, n_features: int = 2048):
    """A fixed random-feature draw from the prior, usable off any grid."""
    draw = spectral_sample(kernel, n_features, seed)
    return lambda x: float(draw(np.asarray(x, dtype=float)))


OBJECTIVES = ("gp-sample", "branin", "six-hump-camel")


def get_objective(name: str, kernel: ProductKernel, domain: Domain, seed):
    if name == "gp-sample":
        return gp_sample(kernel, seed)
    if name == "branin":
        return branin(domain)
    if name == "six-hump-camel":
        return six_hump_camel(domain)
    raise KeyError(f"unknown objective {name!r}; available: {', '.join(OBJECTIVES)}")
