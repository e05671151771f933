"""Deterministic Nelder-Mead minimiser with a simplex-diameter stopping rule."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool


def nelder_mead(
    fun: Callable[[np.ndarray], float],
    x0,
    step=0.1,
    xtol: float = 1e-7,
    max_evals: int = 2000,
) -> NMResult:
    """Minimise ``fun`` from ``x0``.

    Stops when every vertex lies within ``xtol`` (max-norm) of the best
    vertex, or after ``max_evals`` function evaluations.  ``step`` sets the
    initial simplex edge per coordinate (scalar or array).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    values = np.array([fun(v) for v in simplex])
    evals = n + 1

    def diameter():
        return np.max(np.abs(simplex[1:] - simplex[0]))

    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if diameter() < xtol:
            return NMResult(simplex[0].copy(), float(values[0]), evals, True)
        if evals >= max_evals:
            return NMResult(simplex[0].copy(), float(values[0]), evals, False)

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = fun(xr)
        evals += 1
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = fun(xe)
            evals += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
        else:
            xc = centroid + 0.5 * (worst - centroid)
        fc = fun(xc)
        evals += 1
        if fc < min(fr, values[-1]):
            simplex[-1], values[-1] = xc, fc
            continue
        # shrink toward the best vertex
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        values[1:] = [fun(v) for v in simplex[1:]]
        evals += n
