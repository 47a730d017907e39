"""Candidate sweep followed by derivative-free coordinate polishing."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .kernels import Domain

N_STARTS = 5
POLISH_BUDGET = 100


def _initial_step(candidates: np.ndarray, domain: Domain) -> np.ndarray:
    # roughly the candidate spacing, per axis
    m, p = candidates.shape
    return domain.width / max(2.0, m ** (1.0 / p))


def coordinate_polish(f: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, f0: float,
                      domain: Domain, step: np.ndarray, budget: int = POLISH_BUDGET,
                      min_step: float = 1e-9) -> tuple[np.ndarray, float]:
    """Compass search: try +/- step along each axis, accept the best strict
    improvement, otherwise halve the step.  Stops after ``budget`` evaluations.
    """
    x, fx = np.array(x0, dtype=float), float(f0)
    step = np.array(step, dtype=float)
    p = x.size
    used = 0
    while used + 2 * p <= budget and np.max(step / domain.width) > min_step:
        trial = np.repeat(x[None, :], 2 * p, axis=0)
        for i in range(p):
            trial[2 * i, i] += step[i]
            trial[2 * i + 1, i] -= step[i]
        trial = domain.clip(trial)
        vals = np.asarray(f(trial), dtype=float)
        used += 2 * p
        k = int(np.argmax(vals))
        if vals[k] > fx:
            x, fx = trial[k], float(vals[k])
        else:
            step = step / 2
    return x, fx


def maximize(f: Callable[[np.ndarray], np.ndarray], candidates, domain: Domain | None = None,
             n_starts: int = N_STARTS, budget: int = POLISH_BUDGET,
             polish: bool = True) -> tuple[np.ndarray, float]:
    """Maximise a vectorised function over ``candidates`` then polish the best few.

    ``f`` maps an (m, p) array to m values.  Ties in the sweep go to the lowest
    candidate index; polishing only accepts strict improvements.
    """
    C = np.atleast_2d(np.asarray(candidates, dtype=float))
    if C.shape[0] == 0:
        raise ValueError("candidate set is empty")
    vals = np.asarray(f(C), dtype=float)
    best = int(np.argmax(vals))
    x_best, f_best = C[best].copy(), float(vals[best])
    if not polish or domain is None or budget <= 0:
        return x_best, f_best
    order = np.argsort(-vals, kind="stable")[:n_starts]
    step = _initial_step(C, domain)
    for idx in order:
        x, fx = coordinate_polish(f, C[idx], vals[idx], domain, step, budget)
        if fx > f_best:
            x_best, f_best = x, fx
    return x_best, f_best
