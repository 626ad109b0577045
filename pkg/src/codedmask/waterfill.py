"""Waterfilling lower bound on the LMMSE and the optimal transmissivity.

For a mask of transmissivity rho, Parseval caps the total nonzero-frequency
spectral power; distributing that budget by waterfilling against the prior
gives a bound no mask at that rho can beat.  Minimizing over rho gives the
design target the synthesis modules chase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .model import ImagingConfig

__all__ = [
    "SpectrumAllocation",
    "power_budget",
    "waterfill",
    "lower_bound",
    "optimal_rho",
]

_GRID_POINTS = 1024


@dataclass(frozen=True)
class SpectrumAllocation:
    """Waterfilled per-frequency power targets.

    ``targets[i]`` is the power asked of frequency i (DC entry is 0);
    ``weights`` are the targets normalized to sum to 1 (all zero when the
    budget is zero).
    """

    P: float
    T: float
    targets: np.ndarray
    weights: np.ndarray


def power_budget(n: int, rho: float) -> tuple[float, float]:
    """Nonzero-frequency power budget of a [0,1] mask at transmissivity rho.

    Returns ``(exact, simple)`` where exact accounts for the integrality of
    the entry bound and simple is the smooth relaxation n^2 rho (1 - rho).
    ``exact <= simple`` always.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    nr = n * rho
    fl = math.floor(nr)
    exact = n * (fl + (nr - fl) ** 2) - nr * nr
    simple = n * n * rho * (1.0 - rho)
    return max(exact, 0.0), simple


def waterfill(d, gamma: float, P: float) -> SpectrumAllocation:
    """Pour power P over the nonzero frequencies against the prior d.

    Finds the water level T with ``sum_i (1/gamma)(T - 1/d_i)^+ = P`` by
    bisection (the left side is monotone piecewise linear in T).  Frequencies
    with d_i = 0 take no power.
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size < 2:
        raise ValueError("need at least two frequencies to waterfill")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if P < 0:
        raise ValueError("power budget must be nonnegative")

    n = d.size
    targets = np.zeros(n)
    if P == 0:
        return SpectrumAllocation(0.0, 0.0, targets, np.zeros(n))

    tail = d[1:]
    pos = tail > 0
    if not np.any(pos):
        raise ValueError("no frequency with positive prior to pour power into")
    inv = 1.0 / tail[pos]

    lo, hi = 0.0, float(inv.max() + gamma * P)
    for _ in range(200):
        T = 0.5 * (lo + hi)
        poured = float(np.maximum(T - inv, 0.0).sum()) / gamma
        if poured < P:
            lo = T
        else:
            hi = T
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    T = 0.5 * (lo + hi)
    alloc = np.maximum(T - inv, 0.0) / gamma
    # The bracket pins T; rescale the leftover rounding so sums match P.
    total = float(alloc.sum())
    if total > 0:
        alloc *= P / total
    targets[1:][pos] = alloc
    weights = targets / P
    return SpectrumAllocation(float(P), float(T), targets, weights)


def lower_bound(config: ImagingConfig, d, rho: float) -> float:
    """Waterfilling bound at fixed transmissivity: no mask at rho does better.

    The DC term uses the pinned amplitude ``a_hat_0 = N rho``; the rest uses
    the waterfilled allocation of the exact power budget.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    d = np.asarray(d, dtype=float).ravel()
    N = config.npixels
    if d.size != N:
        raise ValueError(f"prior has {d.size} samples, config expects {N}")
    total = float(d.sum())
    if config.t == 0 or rho == 0.0:
        return total
    gamma = config.gamma(rho)
    P, _ = power_budget(N, rho)
    if P > 0 and np.any(d[1:] > 0):
        targets = waterfill(d, gamma, P).targets
    else:
        targets = np.zeros(N)
    theta = N * d[0]
    first = 1.0 / (N / theta + gamma * (N * rho) ** 2) if theta > 0 else 0.0
    tail = d[1:]
    pos = tail > 0
    rest = float(np.sum(1.0 / (1.0 / tail[pos] + gamma * targets[1:][pos])))
    return first + rest


def optimal_rho(config: ImagingConfig, d) -> tuple[float, float]:
    """Minimize the waterfilling bound over transmissivity.

    Dense grid scan followed by bounded scalar refinement on the best
    bracket.  The objective is not convex in general, so this is a heuristic;
    the refinement never returns a value above the best grid point.
    """
    d = np.asarray(d, dtype=float).ravel()
    if config.W <= 0 and config.J <= 0 and config.t > 0:
        raise ValueError("need W > 0 or J > 0 to search over rho")
    rhos = np.linspace(0.0, 1.0, _GRID_POINTS + 1)
    vals = np.array([lower_bound(config, d, r) for r in rhos])
    k = int(np.argmin(vals))
    best_rho, best_val = float(rhos[k]), float(vals[k])
    lo = float(rhos[max(k - 1, 0)])
    hi = float(rhos[min(k + 1, _GRID_POINTS)])
    if hi > lo:
        res = minimize_scalar(lambda r: lower_bound(config, d, float(r)),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        if res.fun <= best_val:
            best_rho, best_val = float(res.x), float(res.fun)
    return best_rho, best_val
